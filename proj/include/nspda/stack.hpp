#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nspda/grammar.hpp"
#include "nspda/rng.hpp"

namespace nspda {

// Read-component intervals. A component falls in exactly one of these, so the
// symbolic stack state is recoverable from any read vector.
inline constexpr double kAlpha1Lo = 0.0001, kAlpha1Hi = 0.008;  // absent
inline constexpr double kAlpha2Lo = 0.901, kAlpha2Hi = 0.992;   // on top
inline constexpr double kAlpha3Lo = 0.025, kAlpha3Hi = 0.110;   // just popped

enum class ReadMode { sample, midpoint, low_edge, high_edge };

struct DigitalStack {
  std::string items{kBottom};  // bottom at front, top at back
  bool illegal_pop = false;

  char top() const { return items.back(); }
  std::size_t depth() const { return items.size(); }
};

// Per-input-symbol stack commands in {-1, 0, +1}.
using ActionVec = std::vector<int>;
// Continuous stack-top encoding. One component per input symbol plus a
// trailing slot for the bottom marker, so an empty stack is as readable as
// any symbol. Length L + 1.
using ReadVec = std::vector<double>;

// Collapses a quantized action to at most one nonzero entry: the surviving
// entry is the one whose pre-activation has the largest magnitude, ties going
// to the lowest symbol index.
ActionVec arbitrate_action(const std::vector<double>& raw, const ActionVec& quantized);

// Executes an arbitrated action. +1 at i pushes symbol i; -1 pops the top
// whatever it is (a mismatched or bottom-only pop sets illegal_pop, the
// latter leaving the stack unchanged); all-zero is a no-op. Returns the
// popped symbol, if any.
std::optional<char> apply_action(DigitalStack& stack, const ActionVec& action,
                                 const Alphabet& alphabet);

// Read vector for the current stack: the top symbol's slot (bottom included)
// draws from the alpha-2 interval, a just-popped symbol that is not back on
// top draws from alpha-3, everything else from alpha-1.
ReadVec read_stack(const DigitalStack& stack, std::optional<char> just_popped,
                   const Alphabet& alphabet, ReadMode mode, Rng& rng);

// Slot index helpers: symbols map to their alphabet index, kBottom to L.
int read_slot(char symbol, const Alphabet& alphabet);
// Inverse of read_stack's top encoding; throws if no slot lies in alpha-2.
char decode_top(const ReadVec& read, const Alphabet& alphabet);

// Debug-log line: "t=<n> action=<op> stack=<items> read=<interval letters>".
std::string trace_line(int t, const ActionVec& action, const DigitalStack& stack,
                       const ReadVec& read, const Alphabet& alphabet);

}  // namespace nspda
