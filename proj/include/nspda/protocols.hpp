#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nspda/baselines.hpp"
#include "nspda/dataset.hpp"
#include "nspda/learning.hpp"
#include "nspda/rules.hpp"

namespace nspda {

struct NoiseConfig {
  double np = 0.15;  // fraction of matrices perturbed per partition
  double beta = 0.01;
  bool enabled = false;
  // Literal pseudocode semantics M = (p*beta)M instead of the default
  // perturbation M *= 1 + p*beta.
  bool literal_replace = false;
  // Apply once per epoch instead of before every gradient computation. The
  // per-sample walk compounds tens of thousands of multiplicative factors
  // per stage, whose negative log-drift flattens any weight it touches.
  bool per_epoch = false;

  void validate() const;  // enabled requires np in [0.08, 0.30]
};

struct CurriculumConfig {
  int n_tr = 14;        // midpoint length threshold
  int stage1_cap = 200;
  int stage2_cap = 350;
  int global_cap = 500;
};

enum class TrainMode { two_stage, incremental, standard };

TrainMode train_mode_from_string(const std::string& s);
std::string to_string(TrainMode mode);

// Flat view of one weight tensor for the noise regularizer: n_matrices blocks
// of mat_size contiguous doubles (A*B blocks for a 4-dimensional tensor, A
// for a 3-dimensional one).
struct TensorView {
  double* data = nullptr;
  long long n_matrices = 0;
  long long mat_size = 0;
};

// Splits [0, n_matrices) into three contiguous near-equal partitions
// (remainder in the last) and picks ceil(np * size) indices per partition
// uniformly without replacement. Requires n_matrices >= 3.
std::vector<long long> create_partitions(long long n_matrices, double np, Rng& rng);

// Draws one Gaussian scalar p, then walks the selected matrices of each view
// in partition order applying M *= (1 + p*beta) (or the literal replacement
// M = (p*beta)M) and halving p after every matrix.
void apply_adaptive_noise(const std::vector<TensorView>& views, const NoiseConfig& cfg,
                          Rng& rng);
// Same walk with the Gaussian scalar supplied by the caller.
void apply_adaptive_noise_with(const std::vector<TensorView>& views,
                               const NoiseConfig& cfg, double p, Rng& rng);

struct EpochRecord {
  int epoch = 0;
  int slice_len = 0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  long long chars = 0;  // cumulative characters presented
  double wall_ms = 0.0;
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> notes;
  bool converged = false;
  int epochs_to_convergence = 0;      // global cap when never converged
  long long chars_to_convergence = 0;
  int epochs_total = 0;
  long long chars_total = 0;
  double final_train_error_pc = 0.0;
  std::map<int, double> test_error_pc;  // per evaluation length
};

// Anything trainable by the protocols: the NSPDA and the baselines implement
// this, so curriculum, noise, loss, and metrics code paths are shared.
class SequenceLearner {
 public:
  virtual ~SequenceLearner() = default;
  // Training-time accuracy (smooth forward pass).
  virtual bool classify_smooth(const std::vector<int>& tokens, Rng& rng) const = 0;
  // Deployment decision rule (quantized weights for the NSPDA).
  virtual bool classify_deploy(const std::vector<int>& tokens, Rng& rng) const = 0;
  // One gradient computation plus parameter update.
  virtual void train_sample(const std::vector<int>& tokens, int label,
                            const OptimizerConfig& opt, int epoch, Rng& rng) = 0;
  virtual std::vector<TensorView> noise_tensors() = 0;
  virtual void save(const std::string& path,
                    const std::map<std::string, std::string>& metadata) const = 0;
};

class NspdaLearner : public SequenceLearner {
 public:
  NspdaLearner(ModelParams params, PdaSpec pda, HintLevel hints, int refine_k);

  bool classify_smooth(const std::vector<int>& tokens, Rng& rng) const override;
  bool classify_deploy(const std::vector<int>& tokens, Rng& rng) const override;
  void train_sample(const std::vector<int>& tokens, int label,
                    const OptimizerConfig& opt, int epoch, Rng& rng) override;
  std::vector<TensorView> noise_tensors() override;
  void save(const std::string& path,
            const std::map<std::string, std::string>& metadata) const override;

  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  std::vector<int> schedule_for(const std::string& tokens) const;

 private:
  ModelParams params_;
  PdaSpec pda_;
  HintLevel hints_;
  int refine_k_;
  std::vector<int> hinted_;
};

class BaselineLearner : public SequenceLearner {
 public:
  BaselineLearner(BaselineParams params, int refine_k)
      : params_(std::move(params)), refine_k_(refine_k) {}

  bool classify_smooth(const std::vector<int>& tokens, Rng& rng) const override;
  bool classify_deploy(const std::vector<int>& tokens, Rng& rng) const override;
  void train_sample(const std::vector<int>& tokens, int label,
                    const OptimizerConfig& opt, int epoch, Rng& rng) override;
  std::vector<TensorView> noise_tensors() override;
  void save(const std::string& path,
            const std::map<std::string, std::string>& metadata) const override;

  const BaselineParams& params() const { return params_; }

 private:
  BaselineParams params_;
  int refine_k_;
};

double accuracy(const SequenceLearner& model, const Dataset& data, bool deploy,
                const Alphabet& alphabet, Rng& rng);
double error_pc(const SequenceLearner& model, const Dataset& data, bool deploy,
                const Alphabet& alphabet, Rng& rng);

struct StageOutcome {
  int epochs = 0;
  long long chars = 0;
  bool converged = false;
};

// Single-pass epochs over `data` until validation convergence (100%
// classification accuracy, checked before each pass) or the epoch budget.
// Per sample: optional adaptive noise, one gradient, one update.
StageOutcome train_stage(SequenceLearner& model, const Dataset& data,
                         const Dataset& validation, const Alphabet& alphabet,
                         int epochs_cap, const OptimizerConfig& opt,
                         const NoiseConfig& noise, bool check_convergence,
                         int& epoch_counter, long long& chars_counter, Rng& train_rng,
                         Rng& noise_rng, std::vector<EpochRecord>* log,
                         int slice_len_label);

// Two-stage incremental procedure: stage 1 walks slices of growing length up
// to n_tr with a stochastic learning rate and no noise, then loops on the
// n_tr slice; stage 2 repeats the pattern up to the longest string with a
// fixed learning rate and the adaptive noise enabled.
RunMetrics two_stage_incremental(SequenceLearner& model, const Dataset& data,
                                 const Dataset& validation, const Alphabet& alphabet,
                                 const CurriculumConfig& curriculum,
                                 const OptimizerConfig& opt, const NoiseConfig& noise,
                                 Rng& rng);

// Single-stage incremental baseline: sequential slices 1..N_max, then loop to
// convergence or the global cap.
RunMetrics incremental_learning(SequenceLearner& model, const Dataset& data,
                                const Dataset& validation, const Alphabet& alphabet,
                                const CurriculumConfig& curriculum,
                                const OptimizerConfig& opt, const NoiseConfig& noise,
                                Rng& rng);

// No curriculum: plain epochs over the full set.
RunMetrics standard_training(SequenceLearner& model, const Dataset& data,
                             const Dataset& validation, const Alphabet& alphabet,
                             const CurriculumConfig& curriculum,
                             const OptimizerConfig& opt, const NoiseConfig& noise,
                             Rng& rng);

RunMetrics train_model(SequenceLearner& model, TrainMode mode, const Dataset& data,
                       const Dataset& validation, const Alphabet& alphabet,
                       const CurriculumConfig& curriculum, const OptimizerConfig& opt,
                       const NoiseConfig& noise, Rng& rng);

}  // namespace nspda
