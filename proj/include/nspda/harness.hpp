#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nspda/protocols.hpp"

namespace nspda {

struct ExperimentConfig {
  std::string grammar = "anbn";
  std::string model = "nspda";  // nspda | rnn1 | rnn2
  ModelOrder order = ModelOrder::third;
  HintLevel hints = HintLevel::none;
  TrainMode mode = TrainMode::two_stage;
  OptimizerConfig opt;
  CurriculumConfig curriculum;
  NoiseConfig noise;
  int refine_k = 4;
  int n_pos = 1987;
  int n_neg = 2021;
  int len_low = 1;
  int len_high = 21;
  std::vector<int> eval_lengths = {60};
  int eval_n = 10000;
  int replicates = 5;
  std::uint64_t data_seed = 1;
  std::uint64_t model_seed = 2;
  std::uint64_t train_seed = 3;
  int baseline_hidden = 32;
  std::string out_dir = "out";
};

// Flat key=value config file (one pair per line, '#' comments). Keys are
// namespaced: model.order, opt.algo, noise.np, curriculum.ntr, data.pos, ...
std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config(ExperimentConfig& cfg,
                  const std::map<std::string, std::string>& kv);

struct Splits {
  Dataset train, valid, test;
};

// Deterministic 80/10/10 split by position (the generator already shuffles).
Splits split_dataset(const Dataset& data, double train_frac = 0.8,
                     double valid_frac = 0.1);

// Balanced evaluation set at one target length: n/2 positives at the closest
// feasible length and n/2 verified negatives around it.
Dataset make_eval_set(const PdaSpec& spec, int length, int n, std::uint64_t seed);

std::unique_ptr<SequenceLearner> build_learner(const ExperimentConfig& cfg,
                                               const PdaSpec& pda, int replicate);

struct ReplicateResult {
  RunMetrics metrics;
};

struct ExperimentResult {
  std::vector<ReplicateResult> replicates;
  double mean_train_error_pc = 0.0;
  std::map<int, double> mean_test_error_pc;
  double mean_chars_to_convergence = 0.0;
  double mean_epochs_to_convergence = 0.0;
};

// Runs `cfg.replicates` independent replicates (seed offsets) over one
// generated dataset; when out_dir is nonempty writes per-replicate metrics,
// checkpoints, and an aggregate table there.
ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_files);

std::string metrics_to_text(const RunMetrics& m);
void write_aggregate_csv(const std::string& path, const ExperimentConfig& cfg,
                         const ExperimentResult& result);

// ---------------------------------------------------------------------------
// Gradient verification surface
// ---------------------------------------------------------------------------
struct GradCheckReport {
  double fd_max_rel = 0.0;     // BPTT vs central differences
  double rtrl_max_rel = 0.0;   // RTRL vs BPTT
  double uoro_max_z = 0.0;     // Monte-Carlo z-score vs RTRL
  int trials = 0;
  bool fd_ok = false;
  bool rtrl_ok = false;
  bool uoro_ok = false;
  bool all_ok() const { return fd_ok && rtrl_ok && uoro_ok; }
};

inline constexpr double kFdTolerance = 1e-4;
inline constexpr double kRtrlTolerance = 1e-6;
inline constexpr double kUoroZBound = 3.0;

GradCheckReport run_gradcheck(int trials, int uoro_samples, std::uint64_t seed,
                              Algorithm reverse_algo = Algorithm::bptt,
                              int tbptt_window = 1 << 20);

// Central-difference gradient of the smooth refinement loss; the forward is
// replayed with an identical generator for every perturbation.
GradientBundle finite_difference_gradient(const ModelParams& params,
                                          const Alphabet& alphabet,
                                          const std::vector<int>& tokens, int label,
                                          const std::vector<int>& schedule,
                                          std::uint64_t rng_seed, double h = 1e-5);

}  // namespace nspda
