#include "nspda/model.hpp"

#include <stdexcept>

#include "nspda/errors.hpp"
#include "nspda/textio.hpp"

namespace nspda {

ModelOrder order_from_string(const std::string& s) {
  if (s == "second") return ModelOrder::second;
  if (s == "third") return ModelOrder::third;
  throw std::invalid_argument("unknown model order: " + s);
}

std::string to_string(ModelOrder order) {
  return order == ModelOrder::second ? "second" : "third";
}

ModelParams init_params(ModelOrder order, int J, int L, std::uint64_t seed) {
  if (J < 1 || L < 2) throw std::invalid_argument("init_params: need J >= 1, L >= 2");
  ModelParams p;
  p.order = order;
  p.J = J;
  p.L = L;
  Rng rng(seed);
  const std::size_t cols = static_cast<std::size_t>(p.cols());
  p.W_s.resize(static_cast<std::size_t>(J) * cols);
  p.W_a.resize(static_cast<std::size_t>(L) * cols);
  p.b_s.assign(static_cast<std::size_t>(J), 0.0);
  p.b_a.assign(static_cast<std::size_t>(L), 0.0);
  p.W_o.resize(static_cast<std::size_t>(J));
  for (auto& w : p.W_s) w = rng.uniform(-0.1, 0.1);
  for (auto& w : p.W_a) w = rng.uniform(-0.1, 0.1);
  for (auto& w : p.W_o) w = rng.uniform(-0.1, 0.1);
  p.b_o = 0.0;
  return p;
}

int size_state_count(ModelOrder order, int M, Rng& rng) {
  if (M < 1) throw std::invalid_argument("size_state_count: M >= 1 required");
  const int extra = order == ModelOrder::second
                        ? static_cast<int>(rng.uniform_int(12, 29))
                        : static_cast<int>(rng.uniform_int(2, 6));
  return M + extra;
}

ModelParams quantize_weights(const ModelParams& params) {
  ModelParams q = params;
  for (auto& w : q.W_s) w = (w > 0.5) ? 1.0 : 0.0;
  for (auto& w : q.W_a) {
    if (w > 0.5) {
      w = 1.0;
    } else if (w < -0.5) {
      w = -1.0;
    } else {
      w = 0.0;
    }
  }
  return q;
}

ModelState init_state(const ModelParams& params, const Alphabet& alphabet,
                      ReadMode read_mode, Rng& rng) {
  if (alphabet.size() != params.L) {
    throw std::invalid_argument("init_state: alphabet size mismatch");
  }
  ModelState s;
  s.z.assign(static_cast<std::size_t>(params.J), 0.0);
  s.z[0] = 1.0;
  s.r = read_stack(s.stack, std::nullopt, alphabet, read_mode, rng);
  s.last_action.assign(static_cast<std::size_t>(params.L), 0);
  s.t = 0;
  return s;
}

void pre_activations(const ModelParams& params, const std::vector<double>& z,
                     const ReadVec& r, int token, std::vector<double>& s_out,
                     std::vector<double>& u_out) {
  const int J = params.J, L = params.L, R = params.read_dim();
  if (static_cast<int>(z.size()) != J || static_cast<int>(r.size()) != R ||
      token < 0 || token >= L) {
    throw std::invalid_argument("pre_activations: shape mismatch");
  }
  s_out.assign(static_cast<std::size_t>(J), 0.0);
  u_out.assign(static_cast<std::size_t>(L), 0.0);
  const int cols = params.cols();

  if (params.order == ModelOrder::third) {
    for (int j = 0; j < J; ++j) {
      const double zj = z[static_cast<std::size_t>(j)];
      if (zj == 0.0) continue;
      for (int k = 0; k < R; ++k) {
        const double zr = zj * r[static_cast<std::size_t>(k)];
        const int col = params.col3(j, k, token);
        for (int i = 0; i < J; ++i) {
          s_out[static_cast<std::size_t>(i)] += params.W_s[static_cast<std::size_t>(i * cols + col)] * zr;
        }
        for (int c = 0; c < L; ++c) {
          u_out[static_cast<std::size_t>(c)] += params.W_a[static_cast<std::size_t>(c * cols + col)] * zr;
        }
      }
    }
  } else {
    for (int j = 0; j < J; ++j) {
      const double zj = z[static_cast<std::size_t>(j)];
      if (zj == 0.0) continue;
      for (int k = 0; k < R; ++k) {
        const double zc = zj * r[static_cast<std::size_t>(k)];
        const int col = params.col2_read(j, k);
        for (int i = 0; i < J; ++i) {
          s_out[static_cast<std::size_t>(i)] += params.W_s[static_cast<std::size_t>(i * cols + col)] * zc;
        }
        for (int c = 0; c < L; ++c) {
          u_out[static_cast<std::size_t>(c)] += params.W_a[static_cast<std::size_t>(c * cols + col)] * zc;
        }
      }
      const int xcol = params.col2_input(j, token);
      for (int i = 0; i < J; ++i) {
        s_out[static_cast<std::size_t>(i)] += params.W_s[static_cast<std::size_t>(i * cols + xcol)] * zj;
      }
      for (int c = 0; c < L; ++c) {
        u_out[static_cast<std::size_t>(c)] += params.W_a[static_cast<std::size_t>(c * cols + xcol)] * zj;
      }
    }
  }
  for (int i = 0; i < J; ++i) s_out[static_cast<std::size_t>(i)] += params.b_s[static_cast<std::size_t>(i)];
  for (int c = 0; c < L; ++c) u_out[static_cast<std::size_t>(c)] += params.b_a[static_cast<std::size_t>(c)];
}

double step(const ModelParams& params, ModelState& state, int token, StepMode mode,
            const Alphabet& alphabet, ReadMode read_mode, Rng& rng) {
  std::vector<double> s, u;
  pre_activations(params, state.z, state.r, token, s, u);

  for (int i = 0; i < params.J; ++i) {
    const double v = s[static_cast<std::size_t>(i)];
    state.z[static_cast<std::size_t>(i)] =
        mode == StepMode::quantized_eval ? g_quant(v) : g_hat(v);
  }

  ActionVec quant(static_cast<std::size_t>(params.L));
  for (int c = 0; c < params.L; ++c) {
    quant[static_cast<std::size_t>(c)] = f_quant(u[static_cast<std::size_t>(c)]);
  }
  state.last_action = arbitrate_action(u, quant);
  const auto popped = apply_action(state.stack, state.last_action, alphabet);
  state.r = read_stack(state.stack, popped, alphabet, read_mode, rng);
  state.t += 1;

  double acc = params.b_o;
  for (int i = 0; i < params.J; ++i) {
    acc += params.W_o[static_cast<std::size_t>(i)] * state.z[static_cast<std::size_t>(i)];
  }
  return g_hat(acc);
}

ForwardResult forward_sequence(const ModelParams& params, const std::vector<int>& tokens,
                               const std::vector<int>& schedule, StepMode mode,
                               const Alphabet& alphabet, ReadMode read_mode, Rng& rng) {
  if (tokens.empty()) throw std::invalid_argument("forward_sequence: empty token sequence");
  if (schedule.size() != tokens.size()) {
    throw std::invalid_argument("forward_sequence: schedule length mismatch");
  }
  ForwardResult out;
  out.final_state = init_state(params, alphabet, read_mode, rng);
  out.offsets.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (schedule[t] < 1) throw std::invalid_argument("forward_sequence: schedule entry < 1");
    out.offsets.push_back(static_cast<int>(out.predictions.size()));
    for (int k = 0; k < schedule[t]; ++k) {
      out.predictions.push_back(
          step(params, out.final_state, tokens[t], mode, alphabet, read_mode, rng));
    }
  }
  return out;
}

bool classify(const ModelParams& params, const std::vector<int>& tokens,
              const Alphabet& alphabet, ReadMode read_mode, Rng& rng) {
  if (tokens.empty()) throw std::invalid_argument("classify: empty token sequence");
  const ModelParams q = quantize_weights(params);
  const std::vector<int> ones(tokens.size(), 1);
  const auto res =
      forward_sequence(q, tokens, ones, StepMode::quantized_eval, alphabet, read_mode, rng);
  return res.predictions.back() > 0.5;
}

std::vector<int> to_indices(const std::string& tokens, const Alphabet& alphabet) {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (char c : tokens) out.push_back(alphabet.index(c));
  return out;
}

bool classify_tokens(const ModelParams& params, const std::string& tokens,
                     const Alphabet& alphabet, ReadMode read_mode, Rng& rng) {
  return classify(params, to_indices(tokens, alphabet), alphabet, read_mode, rng);
}

void save_model(const std::string& path, const ModelParams& params,
                const std::map<std::string, std::string>& metadata) {
  TextDoc doc;
  doc.fields = metadata;
  doc.fields["kind"] = "nspda";
  doc.fields["order"] = to_string(params.order);
  doc.fields["J"] = std::to_string(params.J);
  doc.fields["L"] = std::to_string(params.L);
  doc.tensors["W_s"] = params.W_s;
  doc.tensors["b_s"] = params.b_s;
  doc.tensors["W_a"] = params.W_a;
  doc.tensors["b_a"] = params.b_a;
  doc.tensors["W_o"] = params.W_o;
  doc.tensors["b_o"] = {params.b_o};
  write_text_file(path, doc.serialize("nspda-checkpoint"));
}

std::pair<ModelParams, std::map<std::string, std::string>> load_model(
    const std::string& path) {
  const TextDoc doc = TextDoc::parse(read_text_file(path), "nspda-checkpoint");
  if (doc.field("kind") != "nspda") {
    throw CheckpointError("checkpoint kind is not nspda: " + doc.field("kind"));
  }
  ModelParams p;
  p.order = order_from_string(doc.field("order"));
  p.J = std::stoi(doc.field("J"));
  p.L = std::stoi(doc.field("L"));
  p.W_s = doc.tensor("W_s");
  p.b_s = doc.tensor("b_s");
  p.W_a = doc.tensor("W_a");
  p.b_a = doc.tensor("b_a");
  p.W_o = doc.tensor("W_o");
  p.b_o = doc.tensor("b_o").at(0);
  const std::size_t cols = static_cast<std::size_t>(p.cols());
  if (p.W_s.size() != static_cast<std::size_t>(p.J) * cols ||
      p.W_a.size() != static_cast<std::size_t>(p.L) * cols ||
      p.b_s.size() != static_cast<std::size_t>(p.J) ||
      p.b_a.size() != static_cast<std::size_t>(p.L) ||
      p.W_o.size() != static_cast<std::size_t>(p.J)) {
    throw CheckpointError("checkpoint tensor shapes inconsistent with (order, J, L)");
  }
  return {std::move(p), doc.fields};
}

}  // namespace nspda
