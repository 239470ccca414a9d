#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nspda/grammar.hpp"
#include "nspda/rng.hpp"

namespace nspda {

struct LabeledString {
  std::string tokens;
  int label = 0;  // 1 = in-language

  bool operator==(const LabeledString&) const = default;
};

struct Dataset {
  std::vector<LabeledString> samples;
  std::string grammar_id;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  int max_length() const;  // 0 for an empty dataset
};

// Draws one in-language string with length near `target_len` (snapped to the
// nearest feasible length for the grammar's parity and minimum). The string
// follows a uniformly chosen accepting derivation of the builtin machine.
std::string sample_positive(const PdaSpec& spec, int target_len, Rng& rng);

// Labeled dataset: positives from random derivations with target length
// ~ U(len_low, len_high); negatives half uniform random strings and half
// single-edit perturbations of positives, all verified out-of-language.
// No duplicate token sequences; deterministic given the seed. Throws
// GenerationExhausted past a 100x oversampling budget.
Dataset sample_dataset(const PdaSpec& spec, int n_pos, int n_neg, int len_low,
                       int len_high, std::uint64_t seed);

// Samples with length <= max_len, original order preserved.
Dataset curriculum_slice(const Dataset& data, int max_len);

// Line-oriented text format:
//   #grammar=<name> seed=<int> n=<int>
//   <label>\t<token> <token> ...
// Round-trips losslessly.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string dataset_to_string(const Dataset& data);
Dataset dataset_from_string(const std::string& text);

}  // namespace nspda
