#include "nspda/protocols.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace nspda {

void NoiseConfig::validate() const {
  if (!enabled) return;
  if (np < 0.08 || np > 0.30) {
    throw std::invalid_argument("noise fraction must lie in [0.08, 0.30]");
  }
  if (beta < 0.0) throw std::invalid_argument("noise scale must be nonnegative");
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "2il" || s == "two_stage") return TrainMode::two_stage;
  if (s == "il" || s == "incremental") return TrainMode::incremental;
  if (s == "standard") return TrainMode::standard;
  throw std::invalid_argument("unknown training mode: " + s);
}

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::two_stage:
      return "2il";
    case TrainMode::incremental:
      return "il";
    case TrainMode::standard:
      return "standard";
  }
  return "standard";
}

std::vector<long long> create_partitions(long long n_matrices, double np, Rng& rng) {
  if (n_matrices < 3) {
    throw std::invalid_argument("need at least 3 matrices to partition");
  }
  const long long base = n_matrices / 3;
  const long long sizes[3] = {base, base, n_matrices - 2 * base};
  std::vector<long long> selected;
  long long offset = 0;
  for (int p = 0; p < 3; ++p) {
    const long long size = sizes[p];
    const long long take =
        std::min(size, static_cast<long long>(std::ceil(np * static_cast<double>(size))));
    std::vector<long long> pool(static_cast<std::size_t>(size));
    for (long long i = 0; i < size; ++i) pool[static_cast<std::size_t>(i)] = offset + i;
    for (long long i = 0; i < take; ++i) {
      const std::size_t pick = i + rng.index(pool.size() - static_cast<std::size_t>(i));
      std::swap(pool[static_cast<std::size_t>(i)], pool[pick]);
      selected.push_back(pool[static_cast<std::size_t>(i)]);
    }
    offset += size;
  }
  return selected;
}

void apply_adaptive_noise(const std::vector<TensorView>& views, const NoiseConfig& cfg,
                          Rng& rng) {
  cfg.validate();
  if (!cfg.enabled) return;
  apply_adaptive_noise_with(views, cfg, rng.gaussian(), rng);
}

void apply_adaptive_noise_with(const std::vector<TensorView>& views,
                               const NoiseConfig& cfg, double p, Rng& rng) {
  for (const TensorView& view : views) {
    if (view.n_matrices < 3) continue;  // nothing partitionable
    const auto selected = create_partitions(view.n_matrices, cfg.np, rng);
    for (long long m : selected) {
      double* block = view.data + m * view.mat_size;
      const double factor = cfg.literal_replace ? p * cfg.beta : 1.0 + p * cfg.beta;
      for (long long i = 0; i < view.mat_size; ++i) block[i] *= factor;
      p /= 2.0;
    }
  }
}

NspdaLearner::NspdaLearner(ModelParams params, PdaSpec pda, HintLevel hints,
                           int refine_k)
    : params_(std::move(params)),
      pda_(std::move(pda)),
      hints_(hints),
      refine_k_(refine_k),
      hinted_(hinted_transitions(pda_, hints)) {
  if (refine_k_ < 1) throw std::invalid_argument("refinement count must be >= 1");
}

std::vector<int> NspdaLearner::schedule_for(const std::string& tokens) const {
  const std::vector<int> h = hint_mask(pda_, hinted_, tokens);
  return refine_schedule(h, refine_k_);
}

bool NspdaLearner::classify_smooth(const std::vector<int>& tokens, Rng& rng) const {
  const std::vector<int> ones(tokens.size(), 1);
  const auto res = forward_sequence(params_, tokens, ones, StepMode::smooth_train,
                                    pda_.input_alphabet, ReadMode::sample, rng);
  return res.predictions.back() > 0.5;
}

bool NspdaLearner::classify_deploy(const std::vector<int>& tokens, Rng& rng) const {
  return classify(params_, tokens, pda_.input_alphabet, ReadMode::sample, rng);
}

void NspdaLearner::train_sample(const std::vector<int>& tokens, int label,
                                const OptimizerConfig& opt, int epoch, Rng& rng) {
  std::string text;
  text.reserve(tokens.size());
  for (int t : tokens) text.push_back(pda_.input_alphabet.symbol(t));
  const std::vector<int> schedule = schedule_for(text);
  const GradientBundle g = nspda_gradient(params_, pda_.input_alphabet, tokens, label,
                                          schedule, opt, ReadMode::sample, rng);
  sgd_step(params_, g, opt, epoch, rng);
}

std::vector<TensorView> NspdaLearner::noise_tensors() {
  const long long cols = params_.cols();
  std::vector<TensorView> views;
  if (params_.order == ModelOrder::third) {
    const long long mat = static_cast<long long>(params_.read_dim()) * params_.L;
    views.push_back({params_.W_s.data(), static_cast<long long>(params_.J) * params_.J, mat});
    views.push_back({params_.W_a.data(), static_cast<long long>(params_.L) * params_.J, mat});
  } else {
    // 3-dimensional tensors partition along their first index
    views.push_back({params_.W_s.data(), params_.J, cols});
    views.push_back({params_.W_a.data(), params_.L, cols});
  }
  return views;
}

void NspdaLearner::save(const std::string& path,
                        const std::map<std::string, std::string>& metadata) const {
  auto meta = metadata;
  meta["grammar"] = pda_.name;
  meta["hint_level"] = to_string(hints_);
  save_model(path, params_, meta);
}

bool BaselineLearner::classify_smooth(const std::vector<int>& tokens, Rng&) const {
  return baseline_classify(params_, tokens);
}

bool BaselineLearner::classify_deploy(const std::vector<int>& tokens, Rng&) const {
  return baseline_classify(params_, tokens);
}

void BaselineLearner::train_sample(const std::vector<int>& tokens, int label,
                                   const OptimizerConfig& opt, int epoch, Rng& rng) {
  const std::vector<int> schedule(tokens.size(), refine_k_);
  const CellGrad g = baseline_gradient(params_, tokens, label, schedule, opt, rng);
  baseline_sgd_step(params_, g, opt, epoch, rng);
}

std::vector<TensorView> BaselineLearner::noise_tensors() {
  if (params_.kind != BaselineKind::second_order) return {};
  return {{params_.W.data(), params_.J, static_cast<long long>(params_.cols())}};
}

void BaselineLearner::save(const std::string& path,
                           const std::map<std::string, std::string>& metadata) const {
  save_baseline(path, params_, metadata);
}

double accuracy(const SequenceLearner& model, const Dataset& data, bool deploy,
                const Alphabet& alphabet, Rng& rng) {
  if (data.empty()) return 1.0;
  std::size_t correct = 0;
  for (const auto& sample : data.samples) {
    const auto tokens = to_indices(sample.tokens, alphabet);
    const bool accept = deploy ? model.classify_deploy(tokens, rng)
                               : model.classify_smooth(tokens, rng);
    correct += (accept == (sample.label == 1));
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double error_pc(const SequenceLearner& model, const Dataset& data, bool deploy,
                const Alphabet& alphabet, Rng& rng) {
  return 100.0 * (1.0 - accuracy(model, data, deploy, alphabet, rng));
}

StageOutcome train_stage(SequenceLearner& model, const Dataset& data,
                         const Dataset& validation, const Alphabet& alphabet,
                         int epochs_cap, const OptimizerConfig& opt,
                         const NoiseConfig& noise, bool check_convergence,
                         int& epoch_counter, long long& chars_counter, Rng& train_rng,
                         Rng& noise_rng, std::vector<EpochRecord>* log,
                         int slice_len_label) {
  StageOutcome out;
  if (data.empty()) return out;
  for (int e = 0; e < epochs_cap; ++e) {
    if (check_convergence &&
        accuracy(model, validation, /*deploy=*/false, alphabet, train_rng) >= 1.0) {
      out.converged = true;
      return out;
    }
    const auto start = std::chrono::steady_clock::now();
    if (noise.enabled && noise.per_epoch) {
      apply_adaptive_noise(model.noise_tensors(), noise, noise_rng);
    }
    for (const auto& sample : data.samples) {
      if (noise.enabled && !noise.per_epoch) {
        apply_adaptive_noise(model.noise_tensors(), noise, noise_rng);
      }
      model.train_sample(to_indices(sample.tokens, alphabet), sample.label, opt,
                         epoch_counter, train_rng);
      chars_counter += static_cast<long long>(sample.tokens.size());
      out.chars += static_cast<long long>(sample.tokens.size());
    }
    epoch_counter += 1;
    out.epochs += 1;
    if (log) {
      EpochRecord rec;
      rec.epoch = epoch_counter;
      rec.slice_len = slice_len_label;
      rec.train_acc = accuracy(model, data, false, alphabet, train_rng);
      rec.val_acc = accuracy(model, validation, false, alphabet, train_rng);
      rec.chars = chars_counter;
      rec.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start)
                        .count();
      log->push_back(rec);
    }
  }
  if (check_convergence &&
      accuracy(model, validation, false, alphabet, train_rng) >= 1.0) {
    out.converged = true;
  }
  return out;
}

namespace {

struct RunState {
  int epochs = 0;
  long long chars = 0;
  bool converged = false;
  int epochs_at_convergence = 0;
  long long chars_at_convergence = 0;

  void observe(const StageOutcome& s) {
    if (!converged && s.converged) {
      converged = true;
      epochs_at_convergence = epochs + s.epochs;
      chars_at_convergence = chars + s.chars;
    }
    epochs += s.epochs;
    chars += s.chars;
  }
};

void finalize(RunMetrics& m, const RunState& rs, const CurriculumConfig& cur) {
  (void)cur;
  m.converged = rs.converged;
  m.epochs_total = rs.epochs;
  m.chars_total = rs.chars;
  // unconverged runs report their consumption at the cap
  m.epochs_to_convergence = rs.converged ? rs.epochs_at_convergence : rs.epochs;
  m.chars_to_convergence = rs.converged ? rs.chars_at_convergence : rs.chars;
}

}  // namespace

RunMetrics two_stage_incremental(SequenceLearner& model, const Dataset& data,
                                 const Dataset& validation, const Alphabet& alphabet,
                                 const CurriculumConfig& curriculum,
                                 const OptimizerConfig& opt, const NoiseConfig& noise,
                                 Rng& rng) {
  if (data.empty()) throw std::invalid_argument("two_stage_incremental: empty dataset");
  RunMetrics metrics;
  RunState rs;
  Rng train_rng = rng.fork();
  Rng noise_rng = rng.fork();
  const int n_max = data.max_length();
  int e_n = 0;
  long long chars = 0;
  NoiseConfig off = noise;
  off.enabled = false;

  // Stage 1: stochastic learning rate, no weight noise.
  OptimizerConfig opt1 = opt;
  opt1.lr_mode = LrMode::stochastic;
  for (int len = 1; len <= curriculum.n_tr && e_n < curriculum.global_cap; ++len) {
    const Dataset slice = curriculum_slice(data, len);
    if (slice.empty()) {
      metrics.notes.push_back("stage1: empty slice at length " + std::to_string(len));
      continue;
    }
    rs.observe(train_stage(model, slice, validation, alphabet, 1, opt1, off,
                           /*check_convergence=*/false, e_n, chars, train_rng,
                           noise_rng, &metrics.epochs, len));
  }
  {
    const Dataset slice = curriculum_slice(data, curriculum.n_tr);
    const int budget = std::max(0, std::min(curriculum.stage1_cap, curriculum.global_cap) - e_n);
    if (!slice.empty()) {
      rs.observe(train_stage(model, slice, validation, alphabet, budget, opt1, off,
                             true, e_n, chars, train_rng, noise_rng, &metrics.epochs,
                             curriculum.n_tr));
    }
  }

  // Stage 2: fixed learning rate, adaptive noise active.
  OptimizerConfig opt2 = opt;
  opt2.lr_mode = LrMode::fixed;
  for (int len = 1; len <= n_max && e_n < curriculum.global_cap; ++len) {
    const Dataset slice = curriculum_slice(data, len);
    if (slice.empty()) {
      metrics.notes.push_back("stage2: empty slice at length " + std::to_string(len));
      continue;
    }
    rs.observe(train_stage(model, slice, validation, alphabet, 1, opt2, noise, false,
                           e_n, chars, train_rng, noise_rng, &metrics.epochs, len));
  }
  {
    const int budget = std::max(0, std::min(curriculum.stage2_cap, curriculum.global_cap) - e_n);
    rs.observe(train_stage(model, data, validation, alphabet, budget, opt2, noise,
                           true, e_n, chars, train_rng, noise_rng, &metrics.epochs,
                           n_max));
  }

  finalize(metrics, rs, curriculum);
  return metrics;
}

RunMetrics incremental_learning(SequenceLearner& model, const Dataset& data,
                                const Dataset& validation, const Alphabet& alphabet,
                                const CurriculumConfig& curriculum,
                                const OptimizerConfig& opt, const NoiseConfig& noise,
                                Rng& rng) {
  if (data.empty()) throw std::invalid_argument("incremental_learning: empty dataset");
  RunMetrics metrics;
  RunState rs;
  Rng train_rng = rng.fork();
  Rng noise_rng = rng.fork();
  const int n_max = data.max_length();
  int e_n = 0;
  long long chars = 0;
  for (int len = 1; len <= n_max && e_n < curriculum.global_cap; ++len) {
    const Dataset slice = curriculum_slice(data, len);
    if (slice.empty()) {
      metrics.notes.push_back("il: empty slice at length " + std::to_string(len));
      continue;
    }
    rs.observe(train_stage(model, slice, validation, alphabet, 1, opt, noise, false,
                           e_n, chars, train_rng, noise_rng, &metrics.epochs, len));
  }
  const int budget = std::max(0, curriculum.global_cap - e_n);
  rs.observe(train_stage(model, data, validation, alphabet, budget, opt, noise, true,
                         e_n, chars, train_rng, noise_rng, &metrics.epochs, n_max));
  finalize(metrics, rs, curriculum);
  return metrics;
}

RunMetrics standard_training(SequenceLearner& model, const Dataset& data,
                             const Dataset& validation, const Alphabet& alphabet,
                             const CurriculumConfig& curriculum,
                             const OptimizerConfig& opt, const NoiseConfig& noise,
                             Rng& rng) {
  if (data.empty()) throw std::invalid_argument("standard_training: empty dataset");
  RunMetrics metrics;
  RunState rs;
  Rng train_rng = rng.fork();
  Rng noise_rng = rng.fork();
  int e_n = 0;
  long long chars = 0;
  rs.observe(train_stage(model, data, validation, alphabet, curriculum.global_cap, opt,
                         noise, true, e_n, chars, train_rng, noise_rng,
                         &metrics.epochs, data.max_length()));
  finalize(metrics, rs, curriculum);
  return metrics;
}

RunMetrics train_model(SequenceLearner& model, TrainMode mode, const Dataset& data,
                       const Dataset& validation, const Alphabet& alphabet,
                       const CurriculumConfig& curriculum, const OptimizerConfig& opt,
                       const NoiseConfig& noise, Rng& rng) {
  switch (mode) {
    case TrainMode::two_stage:
      return two_stage_incremental(model, data, validation, alphabet, curriculum, opt,
                                   noise, rng);
    case TrainMode::incremental:
      return incremental_learning(model, data, validation, alphabet, curriculum, opt,
                                  noise, rng);
    case TrainMode::standard:
      return standard_training(model, data, validation, alphabet, curriculum, opt,
                               noise, rng);
  }
  throw std::logic_error("unreachable");
}

}  // namespace nspda
