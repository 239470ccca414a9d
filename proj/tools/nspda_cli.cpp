// Command-line front end: dataset generation, training runs, evaluation
// sweeps, weight programming, and the gradient verification suites.
//
// Exit codes: 0 ok, 2 usage, 3 missing input, 4 bad checkpoint,
// 5 verification failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nspda/errors.hpp"
#include "nspda/harness.hpp"
#include "nspda/textio.hpp"

namespace fs = std::filesystem;
using namespace nspda;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitBadCheckpoint = 4;
constexpr int kExitVerification = 5;

int fail(int code, const std::string& category, const std::string& message) {
  std::cerr << "error: " << category << ": " << message << '\n';
  return code;
}

std::string default_out_dir(const std::string& fallback) {
  const char* env = std::getenv("NSPDA_OUT");
  return env && *env ? std::string(env) : fallback;
}

bool parse_range(const std::string& text, int& lo, int& hi) {
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      lo = hi = std::stoi(text);
    } else {
      lo = std::stoi(text.substr(0, colon));
      hi = std::stoi(text.substr(colon + 1));
    }
  } catch (const std::exception&) {
    return false;
  }
  return lo >= 1 && lo <= hi;
}

int cmd_gen_data(const std::string& grammar, int n_pos, int n_neg,
                 const std::string& len, std::uint64_t seed, std::string out_dir,
                 const std::vector<int>& eval_lengths, int eval_n) {
  int lo = 0, hi = 0;
  if (!parse_range(len, lo, hi)) return fail(kExitUsage, "usage", "bad --len range: " + len);
  PdaSpec pda;
  try {
    pda = builtin_grammar(grammar);
  } catch (const std::invalid_argument& e) {
    return fail(kExitUsage, "usage", e.what());
  }
  out_dir = default_out_dir(out_dir);
  try {
    const Dataset data = sample_dataset(pda, n_pos, n_neg, lo, hi, seed);
    const Splits splits = split_dataset(data);
    fs::create_directories(out_dir);
    save_dataset(splits.train, out_dir + "/train.txt");
    save_dataset(splits.valid, out_dir + "/valid.txt");
    save_dataset(splits.test, out_dir + "/test.txt");
    for (std::size_t i = 0; i < eval_lengths.size(); ++i) {
      const Dataset ev = make_eval_set(pda, eval_lengths[i], eval_n, seed + 1000 + i);
      save_dataset(ev, out_dir + "/eval_T" + std::to_string(eval_lengths[i]) + ".txt");
    }
    std::cout << "wrote " << splits.train.size() << "/" << splits.valid.size() << "/"
              << splits.test.size() << " train/valid/test samples to " << out_dir
              << '\n';
  } catch (const GenerationExhausted& e) {
    return fail(kExitMissingInput, "generation", e.what());
  } catch (const std::exception& e) {
    return fail(kExitUsage, "gen-data", e.what());
  }
  return kExitOk;
}

Dataset must_load(const std::string& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing dataset file " + path);
  return load_dataset(path);
}

int cmd_train(ExperimentConfig cfg, const std::string& data_dir) {
  PdaSpec pda;
  try {
    pda = builtin_grammar(cfg.grammar);
  } catch (const std::invalid_argument& e) {
    return fail(kExitUsage, "usage", e.what());
  }
  Dataset train, valid, test;
  std::vector<std::pair<int, Dataset>> eval_sets;
  try {
    train = must_load(data_dir + "/train.txt");
    valid = must_load(data_dir + "/valid.txt");
    test = must_load(data_dir + "/test.txt");
    for (const auto& entry : fs::directory_iterator(data_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("eval_T", 0) == 0 && name.size() > 10) {
        const int len = std::stoi(name.substr(6, name.size() - 10));
        eval_sets.emplace_back(len, load_dataset(entry.path().string()));
      }
    }
  } catch (const std::exception& e) {
    return fail(kExitMissingInput, "input", e.what());
  }

  try {
    cfg.noise.validate();
    fs::create_directories(cfg.out_dir);
    ExperimentResult agg;
    for (int r = 0; r < cfg.replicates; ++r) {
      auto learner = build_learner(cfg, pda, r);
      Rng train_rng(cfg.train_seed + static_cast<std::uint64_t>(r));
      RunMetrics metrics = train_model(*learner, cfg.mode, train, valid,
                                       pda.input_alphabet, cfg.curriculum, cfg.opt,
                                       cfg.noise, train_rng);
      Rng eval_rng(cfg.train_seed + 7777 + static_cast<std::uint64_t>(r));
      metrics.final_train_error_pc =
          error_pc(*learner, train, true, pda.input_alphabet, eval_rng);
      metrics.test_error_pc[-1] =
          error_pc(*learner, test, true, pda.input_alphabet, eval_rng);
      for (const auto& [len, evset] : eval_sets) {
        metrics.test_error_pc[len] =
            error_pc(*learner, evset, true, pda.input_alphabet, eval_rng);
      }
      const std::string stem = cfg.out_dir + "/replicate" + std::to_string(r);
      write_text_file(stem + ".metrics.txt", metrics_to_text(metrics));
      learner->save(stem + ".ckpt",
                    {{"seed", std::to_string(cfg.model_seed + static_cast<std::uint64_t>(r))},
                     {"grammar", cfg.grammar}});
      std::cout << "replicate " << r << ": converged=" << metrics.converged
                << " epochs=" << metrics.epochs_to_convergence
                << " chars=" << metrics.chars_to_convergence
                << " train_error_pc=" << metrics.final_train_error_pc << '\n';
      agg.replicates.push_back({std::move(metrics)});
    }
    const double n = static_cast<double>(agg.replicates.size());
    for (const auto& rep : agg.replicates) {
      agg.mean_train_error_pc += rep.metrics.final_train_error_pc / n;
      agg.mean_chars_to_convergence +=
          static_cast<double>(rep.metrics.chars_to_convergence) / n;
      agg.mean_epochs_to_convergence +=
          static_cast<double>(rep.metrics.epochs_to_convergence) / n;
      for (const auto& [len, pc] : rep.metrics.test_error_pc) {
        agg.mean_test_error_pc[len] += pc / n;
      }
    }
    write_aggregate_csv(cfg.out_dir + "/aggregate.csv", cfg, agg);
    std::cout << "aggregate: train_error_pc=" << agg.mean_train_error_pc;
    for (const auto& [len, pc] : agg.mean_test_error_pc) {
      if (len >= 0) std::cout << " test_error_pc_T" << len << "=" << pc;
    }
    std::cout << '\n';
  } catch (const CapacityError& e) {
    return fail(kExitUsage, "capacity", e.what());
  } catch (const std::exception& e) {
    return fail(kExitUsage, "train", e.what());
  }
  return kExitOk;
}

ReadMode read_mode_of(const std::string& s) {
  if (s == "sample") return ReadMode::sample;
  if (s == "midpoint") return ReadMode::midpoint;
  if (s == "low") return ReadMode::low_edge;
  if (s == "high") return ReadMode::high_edge;
  throw std::invalid_argument("unknown read mode: " + s);
}

int cmd_eval(const std::string& ckpt, const std::string& data_file,
             const std::string& grammar, const std::vector<int>& lengths, int eval_n,
             std::uint64_t seed, const std::string& reads, bool trace) {
  ModelParams params;
  std::map<std::string, std::string> meta;
  try {
    std::tie(params, meta) = load_model(ckpt);
  } catch (const CheckpointError& e) {
    return fail(kExitBadCheckpoint, "checkpoint", e.what());
  } catch (const std::exception& e) {
    return fail(kExitMissingInput, "input", e.what());
  }

  ReadMode mode;
  try {
    mode = read_mode_of(reads);
  } catch (const std::invalid_argument& e) {
    return fail(kExitUsage, "usage", e.what());
  }

  const std::string grammar_name =
      !grammar.empty() ? grammar
                       : (meta.count("grammar") ? meta.at("grammar") : std::string());
  if (grammar_name.empty()) {
    return fail(kExitUsage, "usage", "no grammar on the checkpoint; pass --grammar");
  }
  PdaSpec pda;
  try {
    pda = builtin_grammar(grammar_name);
  } catch (const std::invalid_argument& e) {
    return fail(kExitUsage, "usage", e.what());
  }
  if (pda.input_alphabet.size() != params.L) {
    return fail(kExitUsage, "usage", "checkpoint L does not match the grammar alphabet");
  }

  auto eval_on = [&](const Dataset& data, const std::string& label) {
    if (data.empty()) throw std::invalid_argument("empty evaluation set: " + label);
    Rng rng(seed);
    std::size_t wrong = 0;
    for (const auto& s : data.samples) {
      const bool accept = classify_tokens(params, s.tokens, pda.input_alphabet, mode, rng);
      wrong += (accept != (s.label == 1));
    }
    std::cout << label << " n=" << data.size() << " error_pc="
              << 100.0 * static_cast<double>(wrong) / static_cast<double>(data.size())
              << '\n';
  };

  try {
    if (!data_file.empty()) {
      eval_on(must_load(data_file), "file=" + data_file);
    } else {
      for (std::size_t i = 0; i < lengths.size(); ++i) {
        const Dataset ev = make_eval_set(pda, lengths[i], eval_n, seed + 1000 + i);
        eval_on(ev, "length=" + std::to_string(lengths[i]));
      }
    }
    if (trace) {
      const Dataset demo = make_eval_set(pda, 8, 4, seed + 5);
      const ModelParams q = quantize_weights(params);
      Rng rng(seed);
      for (const auto& s : demo.samples) {
        std::cout << "trace tokens=" << s.tokens << " label=" << s.label << '\n';
        ModelState st = init_state(q, pda.input_alphabet, mode, rng);
        double yhat = 0.0;
        for (char c : s.tokens) {
          yhat = step(q, st, pda.input_alphabet.index(c), StepMode::quantized_eval,
                      pda.input_alphabet, mode, rng);
          std::cout << "  "
                    << trace_line(st.t, st.last_action, st.stack, st.r, pda.input_alphabet)
                    << '\n';
        }
        std::cout << "  yhat=" << yhat << " accept=" << (yhat > 0.5) << '\n';
      }
    }
  } catch (const std::exception& e) {
    return fail(kExitMissingInput, "eval", e.what());
  }
  return kExitOk;
}

int cmd_program(const std::string& grammar, const std::string& order_s, int state_neurons,
                double strength, const std::string& out_file, bool census) {
  try {
    const PdaSpec pda = builtin_grammar(grammar);
    const ModelOrder order = order_from_string(order_s);
    int J = state_neurons;
    if (J <= 0) {
      J = pda.state_count() +
          (order == ModelOrder::third
               ? 2
               : 2 + static_cast<int>(pda.accepting.size()) * (pda.input_alphabet.size() + 1));
    }
    const ModelParams params = program_full(pda, order, J, strength);
    if (order == ModelOrder::second) {
      std::cout << "second-order split-accepting construction in use\n";
    }
    save_model(out_file, params,
               {{"grammar", grammar}, {"hint_level", "full"}, {"seed", "0"}});
    std::cout << "programmed " << grammar << " order=" << order_s << " J=" << J
              << " -> " << out_file << '\n';
    if (census) {
      const ModelParams q = quantize_weights(params);
      long long s0 = 0, s1 = 0, am = 0, a0 = 0, ap = 0;
      for (double w : q.W_s) (w > 0.5 ? s1 : s0) += 1;
      for (double w : q.W_a) {
        if (w > 0.5) {
          ++ap;
        } else if (w < -0.5) {
          ++am;
        } else {
          ++a0;
        }
      }
      std::cout << "census W_s zeros=" << s0 << " ones=" << s1 << " | W_a neg=" << am
                << " zero=" << a0 << " pos=" << ap << '\n';
    }
  } catch (const CapacityError& e) {
    return fail(kExitUsage, "capacity", e.what());
  } catch (const std::exception& e) {
    return fail(kExitUsage, "program", e.what());
  }
  return kExitOk;
}

int cmd_gradcheck(int trials, int samples, std::uint64_t seed, const std::string& algo,
                  int window) {
  Algorithm reverse = Algorithm::bptt;
  try {
    reverse = algorithm_from_string(algo);
  } catch (const std::invalid_argument& e) {
    return fail(kExitUsage, "usage", e.what());
  }
  if (reverse != Algorithm::bptt && reverse != Algorithm::tbptt) {
    return fail(kExitUsage, "usage", "gradcheck --algo must be bptt or tbptt");
  }
  const GradCheckReport rep = run_gradcheck(trials, samples, seed, reverse, window);
  std::cout << "finite differences vs reverse mode: max_rel=" << rep.fd_max_rel
            << " tol=" << kFdTolerance << " -> " << (rep.fd_ok ? "pass" : "FAIL") << '\n';
  std::cout << "rtrl vs reverse mode:               max_rel=" << rep.rtrl_max_rel
            << " tol=" << kRtrlTolerance << " -> " << (rep.rtrl_ok ? "pass" : "FAIL")
            << '\n';
  std::cout << "uoro monte-carlo unbiasedness:      max_z=" << rep.uoro_max_z
            << " bound=" << kUoroZBound << " -> " << (rep.uoro_ok ? "pass" : "FAIL")
            << '\n';
  return rep.all_ok() ? kExitOk : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural state pushdown automaton laboratory"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate labeled dataset splits");
  std::string g_grammar = "anbn", g_len = "1:21", g_out = "data";
  int g_pos = 1987, g_neg = 2021, g_eval_n = 10000;
  std::uint64_t g_seed = 7;
  std::vector<int> g_eval_lengths = {60};
  gen->add_option("--grammar", g_grammar, "builtin grammar name");
  gen->add_option("--pos", g_pos, "positive sample count");
  gen->add_option("--neg", g_neg, "negative sample count");
  gen->add_option("--len", g_len, "length range lo:hi");
  gen->add_option("--seed", g_seed, "generation seed");
  gen->add_option("--out", g_out, "output directory");
  gen->add_option("--eval-lengths", g_eval_lengths, "long evaluation lengths")->delimiter(',');
  gen->add_option("--eval-n", g_eval_n, "samples per evaluation length");

  auto* tr = app.add_subcommand("train", "Train a model on generated datasets");
  std::string t_config, t_data = "data", t_grammar = "anbn", t_model = "nspda";
  std::string t_order = "third", t_hints = "none", t_algo = "uoro", t_mode = "2il";
  std::string t_noise = "off", t_noise_apply = "sample", t_out = "runs";
  int t_window = 50, t_replicates = 5, t_epochs_cap = -1, t_refine_k = 4, t_hidden = 32;
  double t_np = 0.15, t_beta = 0.01, t_lr0 = 0.1005000321;
  std::uint64_t t_mseed = 2, t_tseed = 3;
  tr->add_option("--config", t_config, "key=value config file");
  tr->add_option("--data", t_data, "dataset directory from gen-data");
  tr->add_option("--grammar", t_grammar, "builtin grammar name");
  tr->add_option("--model", t_model, "nspda | rnn1 | rnn2");
  tr->add_option("--order", t_order, "second | third");
  tr->add_option("--hints", t_hints, "none | hint1 | hint2 | full");
  tr->add_option("--algo", t_algo, "bptt | tbptt | rtrl | uoro");
  tr->add_option("--window", t_window, "tbptt window");
  tr->add_option("--mode", t_mode, "2il | il | standard");
  tr->add_option("--noise", t_noise, "on | off");
  tr->add_option("--np", t_np, "noise fraction");
  tr->add_option("--beta", t_beta, "noise scale");
  tr->add_option("--noise-apply", t_noise_apply, "sample | epoch");
  tr->add_option("--lr0", t_lr0, "initial learning rate");
  tr->add_option("--replicates", t_replicates, "replicate count");
  tr->add_option("--epochs-cap", t_epochs_cap, "override global epoch cap");
  tr->add_option("--refine-k", t_refine_k, "iterative refinement count");
  tr->add_option("--hidden", t_hidden, "baseline hidden size");
  tr->add_option("--model-seed", t_mseed, "model init seed");
  tr->add_option("--train-seed", t_tseed, "training seed");
  tr->add_option("--out", t_out, "output directory");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string e_ckpt, e_data, e_grammar, e_reads = "sample";
  std::vector<int> e_lengths = {60};
  int e_eval_n = 10000;
  std::uint64_t e_seed = 11;
  bool e_trace = false;
  ev->add_option("--checkpoint", e_ckpt, "checkpoint file")->required();
  ev->add_option("--data", e_data, "dataset file to evaluate");
  ev->add_option("--grammar", e_grammar, "grammar for fresh evaluation sets");
  ev->add_option("--lengths", e_lengths, "evaluation lengths")->delimiter(',');
  ev->add_option("--eval-n", e_eval_n, "samples per length");
  ev->add_option("--seed", e_seed, "evaluation seed");
  ev->add_option("--reads", e_reads, "sample | midpoint | low | high");
  ev->add_flag("--trace", e_trace, "dump per-step stack traces for a few strings");

  auto* pr = app.add_subcommand("program", "Compile a machine into weights");
  std::string p_grammar = "anbn", p_order = "third", p_out = "programmed.ckpt";
  int p_J = -1;
  double p_strength = kProgramStrength;
  bool p_census = false;
  pr->add_option("--grammar", p_grammar, "builtin grammar name");
  pr->add_option("--order", p_order, "second | third");
  pr->add_option("--state-neurons", p_J, "state neuron count (default M + surplus)");
  pr->add_option("--strength", p_strength, "programming strength");
  pr->add_option("--out", p_out, "checkpoint path");
  pr->add_flag("--census", p_census, "print quantized tensor value counts");

  auto* gc = app.add_subcommand("gradcheck", "Run the gradient verification suites");
  int c_trials = 20, c_samples = 10000, c_window = 1 << 20;
  std::uint64_t c_seed = 42;
  std::string c_algo = "bptt";
  gc->add_option("--trials", c_trials, "random tiny-model trials");
  gc->add_option("--samples", c_samples, "monte-carlo sample count");
  gc->add_option("--seed", c_seed, "suite seed");
  gc->add_option("--algo", c_algo, "reverse-mode algorithm: bptt | tbptt");
  gc->add_option("--window", c_window, "tbptt window");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: usage: " << e.what() << '\n';
    return kExitUsage;
  }

  if (gen->parsed()) {
    return cmd_gen_data(g_grammar, g_pos, g_neg, g_len, g_seed, g_out, g_eval_lengths,
                        g_eval_n);
  }
  if (tr->parsed()) {
    ExperimentConfig cfg;
    try {
      if (!t_config.empty()) apply_config(cfg, parse_config_file(t_config));
      auto given = [&](const std::string& name) { return tr->get_option(name)->count() > 0; };
      const bool has_config = !t_config.empty();
      if (!has_config || given("--grammar")) cfg.grammar = t_grammar;
      if (!has_config || given("--model")) cfg.model = t_model;
      if (!has_config || given("--order")) cfg.order = order_from_string(t_order);
      if (!has_config || given("--hints")) cfg.hints = hint_from_string(t_hints);
      if (!has_config || given("--algo")) cfg.opt.algo = algorithm_from_string(t_algo);
      if (!has_config || given("--window")) cfg.opt.window = t_window;
      if (!has_config || given("--mode")) cfg.mode = train_mode_from_string(t_mode);
      if (!has_config || given("--noise")) cfg.noise.enabled = (t_noise == "on");
      if (!has_config || given("--np")) cfg.noise.np = t_np;
      if (!has_config || given("--beta")) cfg.noise.beta = t_beta;
      if (!has_config || given("--noise-apply")) cfg.noise.per_epoch = (t_noise_apply == "epoch");
      if (!has_config || given("--lr0")) cfg.opt.lr0 = t_lr0;
      if (!has_config || given("--replicates")) cfg.replicates = t_replicates;
      if (!has_config || given("--refine-k")) cfg.refine_k = t_refine_k;
      if (!has_config || given("--hidden")) cfg.baseline_hidden = t_hidden;
      if (!has_config || given("--model-seed")) cfg.model_seed = t_mseed;
      if (!has_config || given("--train-seed")) cfg.train_seed = t_tseed;
      if (!has_config || given("--out")) cfg.out_dir = t_out;
      if (t_epochs_cap >= 0) {
        cfg.curriculum.global_cap = t_epochs_cap;
        cfg.curriculum.stage1_cap = std::min(cfg.curriculum.stage1_cap, t_epochs_cap);
        cfg.curriculum.stage2_cap = std::min(cfg.curriculum.stage2_cap, t_epochs_cap);
      }
      cfg.out_dir = default_out_dir(cfg.out_dir);
    } catch (const std::exception& e) {
      return fail(kExitUsage, "usage", e.what());
    }
    return cmd_train(cfg, t_data);
  }
  if (ev->parsed()) {
    return cmd_eval(e_ckpt, e_data, e_grammar, e_lengths, e_eval_n, e_seed, e_reads,
                    e_trace);
  }
  if (pr->parsed()) {
    return cmd_program(p_grammar, p_order, p_J, p_strength, p_out, p_census);
  }
  if (gc->parsed()) {
    return cmd_gradcheck(c_trials, c_samples, c_seed, c_algo, c_window);
  }
  return kExitUsage;
}
