#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nspda/grammar.hpp"
#include "nspda/rng.hpp"
#include "nspda/stack.hpp"

namespace nspda {

enum class ModelOrder { second, third };
enum class StepMode { smooth_train, quantized_eval };

ModelOrder order_from_string(const std::string& s);
std::string to_string(ModelOrder order);

// Quantized sigmoidal activations.
inline double g_hat(double v) { return 1.0 / (1.0 + std::exp(-v)); }
inline double f_hat(double v) { return 2.0 * g_hat(v) - 1.0; }
inline double g_quant(double v) { return g_hat(v) > 0.5 ? 1.0 : 0.0; }
inline int f_quant(double v) {
  const double f = f_hat(v);
  if (f > 0.13) return 1;
  if (f >= -0.09) return 0;
  return -1;
}

// Tensor bundle of one state machine. State and action tensors share a column
// space: each to-neuron row holds, for the third order, one weight per
// (from-neuron j, read slot k, input l); for the second order, one weight per
// (from-neuron j, concat slot k) with the read vector and the input
// concatenated. Read vectors carry L+1 slots (the trailing one reads the
// bottom marker), so the third-order state tensor is J x J x (L+1) x L.
struct ModelParams {
  ModelOrder order = ModelOrder::third;
  int J = 0;
  int L = 0;
  std::vector<double> W_s;  // J rows x cols()
  std::vector<double> b_s;  // J
  std::vector<double> W_a;  // L rows x cols()
  std::vector<double> b_a;  // L
  std::vector<double> W_o;  // J
  double b_o = 0.0;

  int read_dim() const { return L + 1; }
  int concat_dim() const { return 2 * L + 1; }
  int cols() const {
    return order == ModelOrder::third ? J * read_dim() * L : J * concat_dim();
  }
  // Column of a third-order entry (j, k, l), or a second-order entry (j, k).
  int col3(int j, int k, int l) const { return (j * read_dim() + k) * L + l; }
  int col2(int j, int k) const { return j * concat_dim() + k; }
  int col2_read(int j, int k) const { return col2(j, k); }
  int col2_input(int j, int l) const { return col2(j, read_dim() + l); }

  double& ws(int i, int col) { return W_s[static_cast<std::size_t>(i * cols() + col)]; }
  double ws(int i, int col) const { return W_s[static_cast<std::size_t>(i * cols() + col)]; }
  double& wa(int c, int col) { return W_a[static_cast<std::size_t>(c * cols() + col)]; }
  double wa(int c, int col) const { return W_a[static_cast<std::size_t>(c * cols() + col)]; }
};

struct ModelState {
  std::vector<double> z;
  DigitalStack stack;
  ReadVec r;
  ActionVec last_action;
  int t = 0;
};

// All tensor entries i.i.d. U(-0.1, 0.1), biases zero.
ModelParams init_params(ModelOrder order, int J, int L, std::uint64_t seed);

// State-neuron count for an M-state machine: M + U(12,29) for the second
// order, M + U(2,6) for the third.
int size_state_count(ModelOrder order, int M, Rng& rng);

// Discrete view: W_s -> {0,1} at threshold 0.5, W_a -> {-1,0,+1} at +-0.5;
// output weights and biases pass through unchanged.
ModelParams quantize_weights(const ModelParams& params);

// Fresh state: neuron 0 high (the start state under the leftmost-first
// assignment), empty stack, read drawn for it.
ModelState init_state(const ModelParams& params, const Alphabet& alphabet,
                      ReadMode read_mode, Rng& rng);

// Pre-activations of the state and action neurons for one step.
void pre_activations(const ModelParams& params, const std::vector<double>& z,
                     const ReadVec& r, int token, std::vector<double>& s_out,
                     std::vector<double>& u_out);

// One inference step: updates the state vector (smooth or quantized), commits
// the arbitrated quantized action to the stack, refreshes the read vector,
// and returns the validity prediction.
double step(const ModelParams& params, ModelState& state, int token, StepMode mode,
            const Alphabet& alphabet, ReadMode read_mode, Rng& rng);

struct ForwardResult {
  std::vector<double> predictions;  // one entry per repeat, grouped by token
  std::vector<int> offsets;         // predictions for token t start at offsets[t]
  ModelState final_state;
};

// Runs step() schedule[t] times per token with state carried across repeats.
ForwardResult forward_sequence(const ModelParams& params, const std::vector<int>& tokens,
                               const std::vector<int>& schedule, StepMode mode,
                               const Alphabet& alphabet, ReadMode read_mode, Rng& rng);

// Quantized-weight evaluation with a single pass per token; accepts when the
// final prediction exceeds 0.5.
bool classify(const ModelParams& params, const std::vector<int>& tokens,
              const Alphabet& alphabet, ReadMode read_mode, Rng& rng);
bool classify_tokens(const ModelParams& params, const std::string& tokens,
                     const Alphabet& alphabet, ReadMode read_mode, Rng& rng);

std::vector<int> to_indices(const std::string& tokens, const Alphabet& alphabet);

// Versioned text checkpoints; reloaded parameters are bit-identical.
void save_model(const std::string& path, const ModelParams& params,
                const std::map<std::string, std::string>& metadata);
std::pair<ModelParams, std::map<std::string, std::string>> load_model(
    const std::string& path);

}  // namespace nspda
