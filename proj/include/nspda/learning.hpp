#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nspda/model.hpp"
#include "nspda/rng.hpp"

namespace nspda {

enum class Algorithm { bptt, tbptt, rtrl, uoro };
enum class LrMode { stochastic, fixed };

Algorithm algorithm_from_string(const std::string& s);
std::string to_string(Algorithm a);

struct OptimizerConfig {
  Algorithm algo = Algorithm::bptt;
  int window = 50;          // tbptt truncation, in effective steps
  double clip = 13.0;       // hard per-coordinate gradient clip
  double lr0 = 0.1005000321;
  LrMode lr_mode = LrMode::fixed;
  long long jacobian_cap = 1LL << 24;  // rtrl guard, in doubles
};

// Binary cross entropy of a single prediction, clamped to [1e-7, 1 - 1e-7].
double instantaneous_loss(double yhat, int label);

// S = K(1 - H) + H.
std::vector<int> refine_schedule(const std::vector<int>& hints, int K);

// Sum of the per-repeat losses; predictions must match the schedule total.
double refinement_loss(const std::vector<double>& predictions, int label,
                       const std::vector<int>& schedule);

// --------------------------------------------------------------------------
// All trainable recurrences here share one shape: per step,
//     s = W_state * phi + b_state,   z' = sigmoid(s),
//     yhat = sigmoid(W_out . z' + b_out),
// where phi is bilinear in the previous state: phi_f = (src_f < 0 ? 1 :
// z[src_f]) * scale_f, written against column col_f of the row-major state
// weight matrix. The gradient procedures below run against this interface,
// so the NSPDA and the baseline networks share them verbatim. Stack reads
// enter phi as exogenous inputs: no gradient flows through the read vector,
// which keeps the recursions of the forward-mode procedures well defined.
// --------------------------------------------------------------------------
struct StepFeatures {
  std::vector<int> src;
  std::vector<double> scale;
  std::vector<int> col;
  std::size_t size() const { return col.size(); }
};

class RecurrentCell {
 public:
  virtual ~RecurrentCell() = default;
  virtual int state_dim() const = 0;    // J
  virtual int weight_cols() const = 0;  // columns of the state-weight matrix
  virtual const double* state_weights() const = 0;
  virtual const double* state_bias() const = 0;
  virtual const double* out_weights() const = 0;
  virtual double out_bias() const = 0;
  // Resets per-sequence context (the stack, for stack models) and returns z0.
  virtual std::vector<double> initial_state(Rng& rng) = 0;
  // Must be called once per effective step in order; advances the context.
  virtual StepFeatures step_features(const std::vector<double>& z, int token,
                                     Rng& rng) = 0;
};

// Gradient with respect to the cell's parameters.
struct CellGrad {
  std::vector<double> w_state;  // J x cols
  std::vector<double> b_state;  // J
  std::vector<double> w_out;    // J
  double b_out = 0.0;
};

CellGrad cell_zero_grad(const RecurrentCell& cell);

// Exact reverse-mode gradient of the refinement loss.
CellGrad bptt_cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens,
                            int label, const std::vector<int>& schedule, Rng& rng);

// Reverse mode with each error signal cut off after `window` effective steps.
CellGrad tbptt_cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens,
                             int label, const std::vector<int>& schedule, int window,
                             Rng& rng);

// Forward-mode exact gradient carrying the full state-parameter Jacobian.
CellGrad rtrl_cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens,
                            int label, const std::vector<int>& schedule,
                            long long jacobian_cap, Rng& rng);

// Rank-one unbiased forward-mode estimate with variance-control factors.
CellGrad uoro_cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens,
                            int label, const std::vector<int>& schedule, Rng& rng);

CellGrad cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens, int label,
                       const std::vector<int>& schedule, const OptimizerConfig& opt,
                       Rng& rng);

// Smooth forward pass loss under the same conventions (the quantity the
// reverse-mode gradients differentiate).
double cell_sequence_loss(RecurrentCell& cell, const std::vector<int>& tokens,
                          int label, const std::vector<int>& schedule, Rng& rng);

// --------------------------------------------------------------------------
// NSPDA adapter
// --------------------------------------------------------------------------
class NspdaCell : public RecurrentCell {
 public:
  NspdaCell(const ModelParams& params, const Alphabet& alphabet, ReadMode read_mode);

  int state_dim() const override { return params_.J; }
  int weight_cols() const override { return params_.cols(); }
  const double* state_weights() const override { return params_.W_s.data(); }
  const double* state_bias() const override { return params_.b_s.data(); }
  const double* out_weights() const override { return params_.W_o.data(); }
  double out_bias() const override { return params_.b_o; }
  std::vector<double> initial_state(Rng& rng) override;
  StepFeatures step_features(const std::vector<double>& z, int token, Rng& rng) override;

 private:
  const ModelParams& params_;
  const Alphabet& alphabet_;
  ReadMode read_mode_;
  DigitalStack stack_;
  ReadVec r_;
};

// One full-precision tensor gradient per parameter of ModelParams. The action
// tensors are present for shape congruence and stay zero under the
// exogenous-read convention.
struct GradientBundle {
  std::vector<double> W_s, b_s, W_a, b_a, W_o;
  double b_o = 0.0;
};

GradientBundle nspda_gradient(const ModelParams& params, const Alphabet& alphabet,
                              const std::vector<int>& tokens, int label,
                              const std::vector<int>& schedule,
                              const OptimizerConfig& opt, ReadMode read_mode, Rng& rng);

double nspda_sequence_loss(const ModelParams& params, const Alphabet& alphabet,
                           const std::vector<int>& tokens, int label,
                           const std::vector<int>& schedule, ReadMode read_mode,
                           Rng& rng);

double learning_rate(const OptimizerConfig& opt, int epoch, Rng& rng);

// Coordinate clip to [-clip, +clip], then params -= lr * grads.
void sgd_step(ModelParams& params, const GradientBundle& grads,
              const OptimizerConfig& opt, int epoch, Rng& rng);

}  // namespace nspda
