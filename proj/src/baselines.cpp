#include "nspda/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "nspda/errors.hpp"
#include "nspda/textio.hpp"

namespace nspda {

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "first_order") return BaselineKind::first_order;
  if (s == "second_order") return BaselineKind::second_order;
  throw std::invalid_argument("unknown baseline kind: " + s);
}

std::string to_string(BaselineKind kind) {
  return kind == BaselineKind::first_order ? "first_order" : "second_order";
}

BaselineParams init_baseline(BaselineKind kind, int J, int L, std::uint64_t seed) {
  if (J < 1 || J > kBaselineMaxHidden) {
    throw std::invalid_argument("baseline hidden size must lie in [1, 50]");
  }
  if (L < 2) throw std::invalid_argument("baseline needs L >= 2");
  BaselineParams p;
  p.kind = kind;
  p.J = J;
  p.L = L;
  Rng rng(seed);
  p.W.resize(static_cast<std::size_t>(J) * static_cast<std::size_t>(p.cols()));
  p.b.assign(static_cast<std::size_t>(J), 0.0);
  p.W_o.resize(static_cast<std::size_t>(J));
  for (auto& w : p.W) w = rng.uniform(-0.1, 0.1);
  for (auto& w : p.W_o) w = rng.uniform(-0.1, 0.1);
  p.b_o = 0.0;
  return p;
}

double baseline_step(const BaselineParams& params, std::vector<double>& hidden,
                     int token) {
  const int J = params.J, L = params.L, cols = params.cols();
  if (static_cast<int>(hidden.size()) != J || token < 0 || token >= L) {
    throw std::invalid_argument("baseline_step: shape mismatch");
  }
  std::vector<double> next(static_cast<std::size_t>(J));
  for (int i = 0; i < J; ++i) {
    double s = params.b[static_cast<std::size_t>(i)];
    const double* row = params.W.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
    if (params.kind == BaselineKind::first_order) {
      for (int j = 0; j < J; ++j) s += row[j] * hidden[static_cast<std::size_t>(j)];
      s += row[J + token];
    } else {
      for (int j = 0; j < J; ++j) s += row[j * L + token] * hidden[static_cast<std::size_t>(j)];
    }
    next[static_cast<std::size_t>(i)] = g_hat(s);
  }
  hidden.swap(next);
  double o = params.b_o;
  for (int i = 0; i < J; ++i) o += params.W_o[static_cast<std::size_t>(i)] * hidden[static_cast<std::size_t>(i)];
  return g_hat(o);
}

bool baseline_classify(const BaselineParams& params, const std::vector<int>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("baseline_classify: empty sequence");
  std::vector<double> hidden(static_cast<std::size_t>(params.J), 0.0);
  double yhat = 0.5;
  for (int t : tokens) yhat = baseline_step(params, hidden, t);
  return yhat > 0.5;
}

StepFeatures BaselineCell::step_features(const std::vector<double>& z, int token,
                                         Rng&) {
  (void)z;
  const int J = params_.J, L = params_.L;
  if (token < 0 || token >= L) throw std::invalid_argument("token index out of range");
  StepFeatures f;
  if (params_.kind == BaselineKind::first_order) {
    for (int j = 0; j < J; ++j) {
      f.src.push_back(j);
      f.scale.push_back(1.0);
      f.col.push_back(j);
    }
    f.src.push_back(-1);  // constant input feature
    f.scale.push_back(1.0);
    f.col.push_back(J + token);
  } else {
    for (int j = 0; j < J; ++j) {
      f.src.push_back(j);
      f.scale.push_back(1.0);
      f.col.push_back(j * L + token);
    }
  }
  return f;
}

CellGrad baseline_gradient(const BaselineParams& params, const std::vector<int>& tokens,
                           int label, const std::vector<int>& schedule,
                           const OptimizerConfig& opt, Rng& rng) {
  BaselineCell cell(params);
  return cell_gradient(cell, tokens, label, schedule, opt, rng);
}

void baseline_sgd_step(BaselineParams& params, const CellGrad& grads,
                       const OptimizerConfig& opt, int epoch, Rng& rng) {
  const double lr = learning_rate(opt, epoch, rng);
  auto update = [&](std::vector<double>& w, const std::vector<double>& g) {
    if (w.size() != g.size()) throw std::invalid_argument("baseline_sgd_step: shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] -= lr * std::clamp(g[i], -opt.clip, opt.clip);
    }
  };
  update(params.W, grads.w_state);
  update(params.b, grads.b_state);
  update(params.W_o, grads.w_out);
  params.b_o -= lr * std::clamp(grads.b_out, -opt.clip, opt.clip);
}

void save_baseline(const std::string& path, const BaselineParams& params,
                   const std::map<std::string, std::string>& metadata) {
  TextDoc doc;
  doc.fields = metadata;
  doc.fields["kind"] = to_string(params.kind);
  doc.fields["J"] = std::to_string(params.J);
  doc.fields["L"] = std::to_string(params.L);
  doc.tensors["W"] = params.W;
  doc.tensors["b"] = params.b;
  doc.tensors["W_o"] = params.W_o;
  doc.tensors["b_o"] = {params.b_o};
  write_text_file(path, doc.serialize("nspda-checkpoint"));
}

std::pair<BaselineParams, std::map<std::string, std::string>> load_baseline(
    const std::string& path) {
  const TextDoc doc = TextDoc::parse(read_text_file(path), "nspda-checkpoint");
  BaselineParams p;
  p.kind = baseline_from_string(doc.field("kind"));
  p.J = std::stoi(doc.field("J"));
  p.L = std::stoi(doc.field("L"));
  p.W = doc.tensor("W");
  p.b = doc.tensor("b");
  p.W_o = doc.tensor("W_o");
  p.b_o = doc.tensor("b_o").at(0);
  if (p.W.size() != static_cast<std::size_t>(p.J) * static_cast<std::size_t>(p.cols()) ||
      p.b.size() != static_cast<std::size_t>(p.J) ||
      p.W_o.size() != static_cast<std::size_t>(p.J)) {
    throw CheckpointError("baseline checkpoint shapes inconsistent");
  }
  return {std::move(p), doc.fields};
}

}  // namespace nspda
