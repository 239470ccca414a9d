#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nspda/learning.hpp"
#include "nspda/rng.hpp"

namespace nspda {

enum class BaselineKind { first_order, second_order };

BaselineKind baseline_from_string(const std::string& s);
std::string to_string(BaselineKind kind);

// Stackless comparison models sharing the training plumbing. First order:
// z' = sigmoid(W_rec z + W_in x + b); second order:
// z'_i = sigmoid(sum_{j,l} W[i][j][l] z_j x_l + b_i). Hidden size capped at 50.
struct BaselineParams {
  BaselineKind kind = BaselineKind::first_order;
  int J = 32;
  int L = 2;
  std::vector<double> W;    // J rows x cols(): first order [rec | in], second order [j*L + l]
  std::vector<double> b;    // J
  std::vector<double> W_o;  // J
  double b_o = 0.0;

  int cols() const { return kind == BaselineKind::first_order ? J + L : J * L; }
};

inline constexpr int kBaselineMaxHidden = 50;

BaselineParams init_baseline(BaselineKind kind, int J, int L, std::uint64_t seed);

// Smooth update; returns the prediction after the step.
double baseline_step(const BaselineParams& params, std::vector<double>& hidden,
                     int token);

// Smooth forward with a single pass per token; accepts when the final
// prediction exceeds 0.5. Baselines are not quantized at evaluation.
bool baseline_classify(const BaselineParams& params, const std::vector<int>& tokens);

class BaselineCell : public RecurrentCell {
 public:
  explicit BaselineCell(const BaselineParams& params) : params_(params) {}

  int state_dim() const override { return params_.J; }
  int weight_cols() const override { return params_.cols(); }
  const double* state_weights() const override { return params_.W.data(); }
  const double* state_bias() const override { return params_.b.data(); }
  const double* out_weights() const override { return params_.W_o.data(); }
  double out_bias() const override { return params_.b_o; }
  std::vector<double> initial_state(Rng&) override {
    return std::vector<double>(static_cast<std::size_t>(params_.J), 0.0);
  }
  StepFeatures step_features(const std::vector<double>& z, int token, Rng& rng) override;

 private:
  const BaselineParams& params_;
};

CellGrad baseline_gradient(const BaselineParams& params, const std::vector<int>& tokens,
                           int label, const std::vector<int>& schedule,
                           const OptimizerConfig& opt, Rng& rng);

void baseline_sgd_step(BaselineParams& params, const CellGrad& grads,
                       const OptimizerConfig& opt, int epoch, Rng& rng);

void save_baseline(const std::string& path, const BaselineParams& params,
                   const std::map<std::string, std::string>& metadata);
std::pair<BaselineParams, std::map<std::string, std::string>> load_baseline(
    const std::string& path);

}  // namespace nspda
