#include "nspda/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nspda/textio.hpp"

namespace nspda {

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line missing '=': " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, val] : kv) {
    if (key == "grammar") {
      cfg.grammar = val;
    } else if (key == "model.kind") {
      cfg.model = val;
    } else if (key == "model.order") {
      cfg.order = order_from_string(val);
    } else if (key == "model.hints") {
      cfg.hints = hint_from_string(val);
    } else if (key == "model.hidden") {
      cfg.baseline_hidden = std::stoi(val);
    } else if (key == "train.mode") {
      cfg.mode = train_mode_from_string(val);
    } else if (key == "train.replicates") {
      cfg.replicates = std::stoi(val);
    } else if (key == "train.refine_k") {
      cfg.refine_k = std::stoi(val);
    } else if (key == "opt.algo") {
      cfg.opt.algo = algorithm_from_string(val);
    } else if (key == "opt.window") {
      cfg.opt.window = std::stoi(val);
    } else if (key == "opt.clip") {
      cfg.opt.clip = std::stod(val);
    } else if (key == "opt.lr0") {
      cfg.opt.lr0 = std::stod(val);
    } else if (key == "opt.lr_mode") {
      cfg.opt.lr_mode = (val == "stochastic") ? LrMode::stochastic : LrMode::fixed;
    } else if (key == "noise.enabled") {
      cfg.noise.enabled = (val == "1" || val == "true" || val == "on");
    } else if (key == "noise.np") {
      cfg.noise.np = std::stod(val);
    } else if (key == "noise.beta") {
      cfg.noise.beta = std::stod(val);
    } else if (key == "noise.literal") {
      cfg.noise.literal_replace = (val == "1" || val == "true" || val == "on");
    } else if (key == "noise.per_epoch") {
      cfg.noise.per_epoch = (val == "1" || val == "true" || val == "on");
    } else if (key == "curriculum.ntr") {
      cfg.curriculum.n_tr = std::stoi(val);
    } else if (key == "curriculum.stage1_cap") {
      cfg.curriculum.stage1_cap = std::stoi(val);
    } else if (key == "curriculum.stage2_cap") {
      cfg.curriculum.stage2_cap = std::stoi(val);
    } else if (key == "curriculum.global_cap") {
      cfg.curriculum.global_cap = std::stoi(val);
    } else if (key == "data.pos") {
      cfg.n_pos = std::stoi(val);
    } else if (key == "data.neg") {
      cfg.n_neg = std::stoi(val);
    } else if (key == "data.len_low") {
      cfg.len_low = std::stoi(val);
    } else if (key == "data.len_high") {
      cfg.len_high = std::stoi(val);
    } else if (key == "data.seed") {
      cfg.data_seed = std::stoull(val);
    } else if (key == "model.seed") {
      cfg.model_seed = std::stoull(val);
    } else if (key == "train.seed") {
      cfg.train_seed = std::stoull(val);
    } else if (key == "eval.n") {
      cfg.eval_n = std::stoi(val);
    } else if (key == "eval.lengths") {
      cfg.eval_lengths.clear();
      std::istringstream is(val);
      std::string item;
      while (std::getline(is, item, ',')) cfg.eval_lengths.push_back(std::stoi(item));
    } else if (key == "out.dir") {
      cfg.out_dir = val;
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
}

Splits split_dataset(const Dataset& data, double train_frac, double valid_frac) {
  if (train_frac <= 0 || valid_frac < 0 || train_frac + valid_frac >= 1.0) {
    throw std::invalid_argument("bad split fractions");
  }
  Splits s;
  s.train.grammar_id = s.valid.grammar_id = s.test.grammar_id = data.grammar_id;
  s.train.seed = s.valid.seed = s.test.seed = data.seed;
  const std::size_t n = data.size();
  const std::size_t n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n));
  const std::size_t n_valid = static_cast<std::size_t>(valid_frac * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) {
      s.train.samples.push_back(data.samples[i]);
    } else if (i < n_train + n_valid) {
      s.valid.samples.push_back(data.samples[i]);
    } else {
      s.test.samples.push_back(data.samples[i]);
    }
  }
  return s;
}

Dataset make_eval_set(const PdaSpec& spec, int length, int n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("evaluation set needs at least 2 samples");
  return sample_dataset(spec, n / 2, n - n / 2, length, length, seed);
}

std::unique_ptr<SequenceLearner> build_learner(const ExperimentConfig& cfg,
                                               const PdaSpec& pda, int replicate) {
  const std::uint64_t seed = cfg.model_seed + static_cast<std::uint64_t>(replicate);
  if (cfg.model == "nspda") {
    Rng size_rng(seed);
    const int J = size_state_count(cfg.order, pda.state_count(), size_rng);
    ModelParams params = init_params(cfg.order, J, pda.input_alphabet.size(), seed);
    if (cfg.hints != HintLevel::none) insert_hints(params, pda, cfg.hints);
    return std::make_unique<NspdaLearner>(std::move(params), pda, cfg.hints,
                                          cfg.refine_k);
  }
  if (cfg.model == "rnn1" || cfg.model == "rnn2") {
    const BaselineKind kind = cfg.model == "rnn1" ? BaselineKind::first_order
                                                  : BaselineKind::second_order;
    return std::make_unique<BaselineLearner>(
        init_baseline(kind, cfg.baseline_hidden, pda.input_alphabet.size(), seed),
        cfg.refine_k);
  }
  throw std::invalid_argument("unknown model kind: " + cfg.model);
}

std::string metrics_to_text(const RunMetrics& m) {
  std::ostringstream os;
  for (const auto& e : m.epochs) {
    os << "epoch=" << e.epoch << " slice=" << e.slice_len << " train_acc=" << e.train_acc
       << " val_acc=" << e.val_acc << " chars=" << e.chars << " wall_ms=" << e.wall_ms
       << '\n';
  }
  for (const auto& note : m.notes) os << "note=" << note << '\n';
  os << "final converged=" << (m.converged ? 1 : 0)
     << " epochs_to_convergence=" << m.epochs_to_convergence
     << " chars_to_convergence=" << m.chars_to_convergence
     << " epochs_total=" << m.epochs_total << " chars_total=" << m.chars_total
     << " train_error_pc=" << m.final_train_error_pc << '\n';
  for (const auto& [len, pc] : m.test_error_pc) {
    os << "test_error length=" << len << " error_pc=" << pc << '\n';
  }
  return os.str();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, bool write_files) {
  const PdaSpec pda = builtin_grammar(cfg.grammar);
  const Alphabet& alphabet = pda.input_alphabet;
  const Dataset data =
      sample_dataset(pda, cfg.n_pos, cfg.n_neg, cfg.len_low, cfg.len_high, cfg.data_seed);
  const Splits splits = split_dataset(data);

  std::vector<Dataset> eval_sets;
  for (std::size_t i = 0; i < cfg.eval_lengths.size(); ++i) {
    eval_sets.push_back(make_eval_set(pda, cfg.eval_lengths[i], cfg.eval_n,
                                      cfg.data_seed + 1000 + i));
  }

  namespace fs = std::filesystem;
  if (write_files) fs::create_directories(cfg.out_dir);

  ExperimentResult result;
  for (int r = 0; r < cfg.replicates; ++r) {
    auto learner = build_learner(cfg, pda, r);
    Rng train_rng(cfg.train_seed + static_cast<std::uint64_t>(r));
    RunMetrics metrics =
        train_model(*learner, cfg.mode, splits.train, splits.valid, alphabet,
                    cfg.curriculum, cfg.opt, cfg.noise, train_rng);

    Rng eval_rng(cfg.train_seed + 7777 + static_cast<std::uint64_t>(r));
    metrics.final_train_error_pc =
        error_pc(*learner, splits.train, /*deploy=*/true, alphabet, eval_rng);
    metrics.test_error_pc[-1] =
        error_pc(*learner, splits.test, true, alphabet, eval_rng);
    for (std::size_t i = 0; i < eval_sets.size(); ++i) {
      metrics.test_error_pc[cfg.eval_lengths[i]] =
          error_pc(*learner, eval_sets[i], true, alphabet, eval_rng);
    }

    if (write_files) {
      const std::string stem = cfg.out_dir + "/replicate" + std::to_string(r);
      write_text_file(stem + ".metrics.txt", metrics_to_text(metrics));
      learner->save(stem + ".ckpt",
                    {{"seed", std::to_string(cfg.model_seed + static_cast<std::uint64_t>(r))}});
    }
    result.replicates.push_back({std::move(metrics)});
  }

  const double n = static_cast<double>(result.replicates.size());
  for (const auto& rep : result.replicates) {
    result.mean_train_error_pc += rep.metrics.final_train_error_pc / n;
    result.mean_chars_to_convergence +=
        static_cast<double>(rep.metrics.chars_to_convergence) / n;
    result.mean_epochs_to_convergence +=
        static_cast<double>(rep.metrics.epochs_to_convergence) / n;
    for (const auto& [len, pc] : rep.metrics.test_error_pc) {
      result.mean_test_error_pc[len] += pc / n;
    }
  }
  if (write_files) {
    write_aggregate_csv(cfg.out_dir + "/aggregate.csv", cfg, result);
  }
  return result;
}

void write_aggregate_csv(const std::string& path, const ExperimentConfig& cfg,
                         const ExperimentResult& result) {
  std::ostringstream os;
  os << "replicate,converged,epochs_to_convergence,chars_to_convergence,"
        "train_error_pc";
  for (const auto& [len, pc] : result.mean_test_error_pc) {
    (void)pc;
    os << "," << (len < 0 ? std::string("test_error_pc") : "test_error_pc_T" + std::to_string(len));
  }
  os << '\n';
  for (std::size_t r = 0; r < result.replicates.size(); ++r) {
    const RunMetrics& m = result.replicates[r].metrics;
    os << r << ',' << (m.converged ? 1 : 0) << ',' << m.epochs_to_convergence << ','
       << m.chars_to_convergence << ',' << m.final_train_error_pc;
    for (const auto& [len, pc] : result.mean_test_error_pc) {
      (void)pc;
      const auto it = m.test_error_pc.find(len);
      os << ',' << (it == m.test_error_pc.end() ? 0.0 : it->second);
    }
    os << '\n';
  }
  os << "mean,," << result.mean_epochs_to_convergence << ','
     << result.mean_chars_to_convergence << ',' << result.mean_train_error_pc;
  for (const auto& [len, pc] : result.mean_test_error_pc) {
    (void)len;
    os << ',' << pc;
  }
  os << '\n';
  (void)cfg;
  write_text_file(path, os.str());
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

GradientBundle finite_difference_gradient(const ModelParams& params,
                                          const Alphabet& alphabet,
                                          const std::vector<int>& tokens, int label,
                                          const std::vector<int>& schedule,
                                          std::uint64_t rng_seed, double h) {
  auto loss_at = [&](const ModelParams& p) {
    Rng rng(rng_seed);
    return nspda_sequence_loss(p, alphabet, tokens, label, schedule,
                               ReadMode::midpoint, rng);
  };
  GradientBundle g;
  ModelParams work = params;
  auto diff_vec = [&](std::vector<double> ModelParams::* member, std::vector<double>& out) {
    const std::size_t n = (params.*member).size();
    out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double saved = (work.*member)[i];
      (work.*member)[i] = saved + h;
      const double up = loss_at(work);
      (work.*member)[i] = saved - h;
      const double dn = loss_at(work);
      (work.*member)[i] = saved;
      out[i] = (up - dn) / (2.0 * h);
    }
  };
  diff_vec(&ModelParams::W_s, g.W_s);
  diff_vec(&ModelParams::b_s, g.b_s);
  diff_vec(&ModelParams::W_a, g.W_a);
  diff_vec(&ModelParams::b_a, g.b_a);
  diff_vec(&ModelParams::W_o, g.W_o);
  {
    const double saved = work.b_o;
    work.b_o = saved + h;
    const double up = loss_at(work);
    work.b_o = saved - h;
    const double dn = loss_at(work);
    work.b_o = saved;
    g.b_o = (up - dn) / (2.0 * h);
  }
  return g;
}

namespace {

double robust_rel(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / scale;
}

double bundle_max_rel(const GradientBundle& a, const GradientBundle& b) {
  double worst = 0.0;
  auto scan = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, robust_rel(x[i], y[i]));
  };
  scan(a.W_s, b.W_s);
  scan(a.b_s, b.b_s);
  scan(a.W_a, b.W_a);
  scan(a.b_a, b.b_a);
  scan(a.W_o, b.W_o);
  worst = std::max(worst, robust_rel(a.b_o, b.b_o));
  return worst;
}

double bundle_max_rel_exact(const GradientBundle& a, const GradientBundle& b) {
  double worst = 0.0;
  auto scan = [&](const std::vector<double>& x, const std::vector<double>& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, std::fabs(x[i] - y[i]) / (std::fabs(y[i]) + 1e-12));
    }
  };
  scan(a.W_s, b.W_s);
  scan(a.b_s, b.b_s);
  scan(a.W_a, b.W_a);
  scan(a.b_a, b.b_a);
  scan(a.W_o, b.W_o);
  worst = std::max(worst, std::fabs(a.b_o - b.b_o) / (std::fabs(b.b_o) + 1e-12));
  return worst;
}

struct TinyProblem {
  ModelParams params;
  Alphabet alphabet{"ab"};
  std::vector<int> tokens;
  int label = 0;
  std::vector<int> schedule;
  std::uint64_t forward_seed = 0;
};

TinyProblem make_tiny_problem(std::uint64_t seed, int trial) {
  TinyProblem tp;
  Rng rng(seed + static_cast<std::uint64_t>(trial) * 101);
  tp.params = init_params(ModelOrder::third, 3, 2, rng.next_u64());
  const int T = static_cast<int>(rng.uniform_int(2, 5));
  for (int t = 0; t < T; ++t) tp.tokens.push_back(static_cast<int>(rng.uniform_int(0, 1)));
  tp.label = static_cast<int>(rng.uniform_int(0, 1));
  const int K = (trial % 2 == 0) ? 1 : 4;
  tp.schedule.assign(tp.tokens.size(), K);
  tp.forward_seed = rng.next_u64();
  return tp;
}

}  // namespace

GradCheckReport run_gradcheck(int trials, int uoro_samples, std::uint64_t seed,
                              Algorithm reverse_algo, int tbptt_window) {
  GradCheckReport report;
  report.trials = trials;

  OptimizerConfig rev;
  rev.algo = reverse_algo;
  rev.window = tbptt_window;
  OptimizerConfig rtrl;
  rtrl.algo = Algorithm::rtrl;

  for (int trial = 0; trial < trials; ++trial) {
    const TinyProblem tp = make_tiny_problem(seed, trial);
    Rng r1(tp.forward_seed), r2(tp.forward_seed);
    const GradientBundle g = nspda_gradient(tp.params, tp.alphabet, tp.tokens, tp.label,
                                            tp.schedule, rev, ReadMode::midpoint, r1);
    const GradientBundle fd = finite_difference_gradient(
        tp.params, tp.alphabet, tp.tokens, tp.label, tp.schedule, tp.forward_seed);
    report.fd_max_rel = std::max(report.fd_max_rel, bundle_max_rel(g, fd));

    const GradientBundle rt = nspda_gradient(tp.params, tp.alphabet, tp.tokens,
                                             tp.label, tp.schedule, rtrl,
                                             ReadMode::midpoint, r2);
    report.rtrl_max_rel = std::max(report.rtrl_max_rel, bundle_max_rel_exact(rt, g));
  }

  // Monte-Carlo unbiasedness of the rank-one estimator on one fixed problem.
  {
    const TinyProblem tp = make_tiny_problem(seed, 3);
    Rng rr(tp.forward_seed);
    const GradientBundle ref = nspda_gradient(tp.params, tp.alphabet, tp.tokens,
                                              tp.label, tp.schedule, rtrl,
                                              ReadMode::midpoint, rr);
    const std::size_t n_ws = ref.W_s.size();
    const std::size_t dim = n_ws + ref.b_s.size() + ref.W_o.size() + 1;
    std::vector<double> sum(dim, 0.0), sumsq(dim, 0.0);
    auto flatten = [&](const GradientBundle& g, std::vector<double>& out) {
      out.clear();
      out.insert(out.end(), g.W_s.begin(), g.W_s.end());
      out.insert(out.end(), g.b_s.begin(), g.b_s.end());
      out.insert(out.end(), g.W_o.begin(), g.W_o.end());
      out.push_back(g.b_o);
    };
    std::vector<double> flat_ref, flat;
    flatten(ref, flat_ref);
    OptimizerConfig uoro;
    uoro.algo = Algorithm::uoro;
    for (int k = 0; k < uoro_samples; ++k) {
      Rng rk(seed * 1315423911ULL + static_cast<std::uint64_t>(k) + 17);
      const GradientBundle g = nspda_gradient(tp.params, tp.alphabet, tp.tokens,
                                              tp.label, tp.schedule, uoro,
                                              ReadMode::midpoint, rk);
      flatten(g, flat);
      for (std::size_t i = 0; i < dim; ++i) {
        sum[i] += flat[i];
        sumsq[i] += flat[i] * flat[i];
      }
    }
    const double n = static_cast<double>(uoro_samples);
    for (std::size_t i = 0; i < dim; ++i) {
      const double mean = sum[i] / n;
      const double var = std::max(0.0, sumsq[i] / n - mean * mean);
      const double se = std::sqrt(var / n);
      const double diff = std::fabs(mean - flat_ref[i]);
      const double z = se > 1e-15 ? diff / se : (diff < 1e-12 ? 0.0 : 1e9);
      report.uoro_max_z = std::max(report.uoro_max_z, z);
    }
  }

  report.fd_ok = report.fd_max_rel < kFdTolerance;
  report.rtrl_ok = report.rtrl_max_rel < kRtrlTolerance;
  report.uoro_ok = report.uoro_max_z < kUoroZBound;
  return report;
}

}  // namespace nspda
