#include "nspda/learning.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "nspda/errors.hpp"

namespace nspda {

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "bptt") return Algorithm::bptt;
  if (s == "tbptt") return Algorithm::tbptt;
  if (s == "rtrl") return Algorithm::rtrl;
  if (s == "uoro") return Algorithm::uoro;
  throw std::invalid_argument("unknown algorithm: " + s);
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::bptt:
      return "bptt";
    case Algorithm::tbptt:
      return "tbptt";
    case Algorithm::rtrl:
      return "rtrl";
    case Algorithm::uoro:
      return "uoro";
  }
  return "bptt";
}

double instantaneous_loss(double yhat, int label) {
  constexpr double eps = 1e-7;
  const double p = std::min(1.0 - eps, std::max(eps, yhat));
  return label ? -std::log(p) : -std::log(1.0 - p);
}

std::vector<int> refine_schedule(const std::vector<int>& hints, int K) {
  if (K < 1) throw std::invalid_argument("refine_schedule: K >= 1 required");
  std::vector<int> s(hints.size());
  for (std::size_t t = 0; t < hints.size(); ++t) {
    const int h = hints[t];
    if (h != 0 && h != 1) throw std::invalid_argument("hints must be binary");
    s[t] = K * (1 - h) + h;
  }
  return s;
}

double refinement_loss(const std::vector<double>& predictions, int label,
                       const std::vector<int>& schedule) {
  std::size_t expected = 0;
  for (int s : schedule) expected += static_cast<std::size_t>(s);
  if (predictions.size() != expected) {
    throw std::invalid_argument("refinement_loss: schedule/prediction length mismatch");
  }
  double total = 0.0;
  for (double p : predictions) total += instantaneous_loss(p, label);
  return total;
}

namespace {

std::vector<int> effective_stream(const std::vector<int>& tokens,
                                  const std::vector<int>& schedule) {
  if (tokens.empty()) throw std::invalid_argument("gradient: empty token sequence");
  if (tokens.size() != schedule.size()) {
    throw std::invalid_argument("gradient: schedule length mismatch");
  }
  std::vector<int> stream;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (schedule[t] < 1) throw std::invalid_argument("gradient: schedule entry < 1");
    for (int k = 0; k < schedule[t]; ++k) stream.push_back(tokens[t]);
  }
  return stream;
}

struct StepRecord {
  StepFeatures feats;
  std::vector<double> phi;
  std::vector<double> z;  // post-step state
  double yhat = 0.0;
};

std::vector<double> phi_values(const StepFeatures& f, const std::vector<double>& z) {
  std::vector<double> phi(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    phi[i] = (f.src[i] < 0 ? 1.0 : z[static_cast<std::size_t>(f.src[i])]) * f.scale[i];
  }
  return phi;
}

void smooth_step(const RecurrentCell& cell, const StepFeatures& f,
                 const std::vector<double>& phi, std::vector<double>& z_out,
                 double& yhat_out) {
  const int J = cell.state_dim();
  const int cols = cell.weight_cols();
  const double* W = cell.state_weights();
  z_out.assign(static_cast<std::size_t>(J), 0.0);
  for (int i = 0; i < J; ++i) {
    double s = cell.state_bias()[i];
    const double* row = W + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
    for (std::size_t k = 0; k < f.size(); ++k) s += row[f.col[k]] * phi[k];
    z_out[static_cast<std::size_t>(i)] = g_hat(s);
  }
  double o = cell.out_bias();
  for (int i = 0; i < J; ++i) o += cell.out_weights()[i] * z_out[static_cast<std::size_t>(i)];
  yhat_out = g_hat(o);
}

std::vector<StepRecord> run_forward(RecurrentCell& cell, const std::vector<int>& stream,
                                    Rng& rng) {
  std::vector<StepRecord> steps;
  steps.reserve(stream.size());
  std::vector<double> z = cell.initial_state(rng);
  for (int token : stream) {
    StepRecord rec;
    rec.feats = cell.step_features(z, token, rng);
    rec.phi = phi_values(rec.feats, z);
    smooth_step(cell, rec.feats, rec.phi, rec.z, rec.yhat);
    z = rec.z;
    steps.push_back(std::move(rec));
  }
  return steps;
}

// delta of the pre-activation of z_new given delta of z_new
void to_pre(const std::vector<double>& z_new, std::vector<double>& dz) {
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= z_new[i] * (1.0 - z_new[i]);
}

// delta on the previous state: dz_prev[src_f] += scale_f * sum_i ds_i W[i,col_f]
void back_state(const RecurrentCell& cell, const StepFeatures& f,
                const std::vector<double>& ds, std::vector<double>& dz_prev) {
  const int J = cell.state_dim();
  const int cols = cell.weight_cols();
  const double* W = cell.state_weights();
  std::fill(dz_prev.begin(), dz_prev.end(), 0.0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f.src[k] < 0) continue;
    double m = 0.0;
    for (int i = 0; i < J; ++i) {
      m += ds[static_cast<std::size_t>(i)] *
           W[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(f.col[k])];
    }
    dz_prev[static_cast<std::size_t>(f.src[k])] += m * f.scale[k];
  }
}

void accumulate_params(const RecurrentCell& cell, const StepFeatures& f,
                       const std::vector<double>& phi, const std::vector<double>& ds,
                       CellGrad& g) {
  const int J = cell.state_dim();
  const int cols = cell.weight_cols();
  for (int i = 0; i < J; ++i) {
    const double d = ds[static_cast<std::size_t>(i)];
    if (d == 0.0) continue;
    double* row = g.w_state.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
    for (std::size_t k = 0; k < f.size(); ++k) row[f.col[k]] += d * phi[k];
    g.b_state[static_cast<std::size_t>(i)] += d;
  }
}

}  // namespace

CellGrad cell_zero_grad(const RecurrentCell& cell) {
  CellGrad g;
  g.w_state.assign(static_cast<std::size_t>(cell.state_dim()) *
                       static_cast<std::size_t>(cell.weight_cols()),
                   0.0);
  g.b_state.assign(static_cast<std::size_t>(cell.state_dim()), 0.0);
  g.w_out.assign(static_cast<std::size_t>(cell.state_dim()), 0.0);
  g.b_out = 0.0;
  return g;
}

double cell_sequence_loss(RecurrentCell& cell, const std::vector<int>& tokens,
                          int label, const std::vector<int>& schedule, Rng& rng) {
  const auto stream = effective_stream(tokens, schedule);
  const auto steps = run_forward(cell, stream, rng);
  double total = 0.0;
  for (const auto& s : steps) total += instantaneous_loss(s.yhat, label);
  return total;
}

CellGrad bptt_cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens,
                            int label, const std::vector<int>& schedule, Rng& rng) {
  const auto stream = effective_stream(tokens, schedule);
  const auto steps = run_forward(cell, stream, rng);
  const int J = cell.state_dim();
  CellGrad g = cell_zero_grad(cell);

  std::vector<double> carry(static_cast<std::size_t>(J), 0.0);
  std::vector<double> dz(static_cast<std::size_t>(J));
  std::vector<double> dz_prev(static_cast<std::size_t>(J));
  for (std::size_t e = steps.size(); e-- > 0;) {
    const StepRecord& rec = steps[e];
    const double dyh = rec.yhat - static_cast<double>(label);
    g.b_out += dyh;
    for (int i = 0; i < J; ++i) {
      g.w_out[static_cast<std::size_t>(i)] += dyh * rec.z[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < J; ++i) {
      dz[static_cast<std::size_t>(i)] =
          carry[static_cast<std::size_t>(i)] + dyh * cell.out_weights()[i];
    }
    to_pre(rec.z, dz);
    accumulate_params(cell, rec.feats, rec.phi, dz, g);
    back_state(cell, rec.feats, dz, dz_prev);
    carry = dz_prev;
  }
  return g;
}

CellGrad tbptt_cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens,
                             int label, const std::vector<int>& schedule, int window,
                             Rng& rng) {
  if (window < 1) throw std::invalid_argument("tbptt: window >= 1 required");
  const auto stream = effective_stream(tokens, schedule);
  const auto steps = run_forward(cell, stream, rng);
  const int J = cell.state_dim();
  CellGrad g = cell_zero_grad(cell);

  // One delta bucket per pending error signal, aged per reverse step so each
  // signal reaches exactly `window` steps.
  std::deque<std::vector<double>> buckets;
  std::vector<double> ds(static_cast<std::size_t>(J));
  std::vector<double> dz_prev(static_cast<std::size_t>(J));
  for (std::size_t e = steps.size(); e-- > 0;) {
    const StepRecord& rec = steps[e];
    const double dyh = rec.yhat - static_cast<double>(label);
    g.b_out += dyh;
    for (int i = 0; i < J; ++i) {
      g.w_out[static_cast<std::size_t>(i)] += dyh * rec.z[static_cast<std::size_t>(i)];
    }
    std::vector<double> fresh(static_cast<std::size_t>(J));
    for (int i = 0; i < J; ++i) fresh[static_cast<std::size_t>(i)] = dyh * cell.out_weights()[i];
    buckets.push_front(std::move(fresh));
    if (static_cast<int>(buckets.size()) > window) buckets.pop_back();

    std::fill(ds.begin(), ds.end(), 0.0);
    for (const auto& b : buckets) {
      for (int i = 0; i < J; ++i) ds[static_cast<std::size_t>(i)] += b[static_cast<std::size_t>(i)];
    }
    to_pre(rec.z, ds);
    accumulate_params(cell, rec.feats, rec.phi, ds, g);

    for (auto& b : buckets) {
      std::vector<double> bd = b;
      to_pre(rec.z, bd);
      back_state(cell, rec.feats, bd, dz_prev);
      b = dz_prev;
    }
  }
  return g;
}

namespace {

// M[i][j] = dpre_i/dz_prev_j for one step
std::vector<double> state_jacobian(const RecurrentCell& cell, const StepFeatures& f) {
  const int J = cell.state_dim();
  const int cols = cell.weight_cols();
  const double* W = cell.state_weights();
  std::vector<double> M(static_cast<std::size_t>(J) * static_cast<std::size_t>(J), 0.0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f.src[k] < 0) continue;
    const std::size_t j = static_cast<std::size_t>(f.src[k]);
    for (int i = 0; i < J; ++i) {
      M[static_cast<std::size_t>(i) * static_cast<std::size_t>(J) + j] +=
          W[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols) +
            static_cast<std::size_t>(f.col[k])] *
          f.scale[k];
    }
  }
  return M;
}

}  // namespace

CellGrad rtrl_cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens,
                            int label, const std::vector<int>& schedule,
                            long long jacobian_cap, Rng& rng) {
  const auto stream = effective_stream(tokens, schedule);
  const int J = cell.state_dim();
  const int cols = cell.weight_cols();
  const long long C = static_cast<long long>(J) * cols + J;  // state weights + bias
  if (static_cast<long long>(J) * C > jacobian_cap) {
    throw CapacityError("rtrl Jacobian of " + std::to_string(J * C) +
                        " doubles exceeds the configured cap");
  }

  CellGrad g = cell_zero_grad(cell);
  std::vector<double> P(static_cast<std::size_t>(J * C), 0.0);  // dz/dtheta, row-major
  std::vector<double> Pn(P.size());
  std::vector<double> z = cell.initial_state(rng);

  for (int token : stream) {
    const StepFeatures f = cell.step_features(z, token, rng);
    const auto phi = phi_values(f, z);
    std::vector<double> z_new;
    double yhat;
    smooth_step(cell, f, phi, z_new, yhat);
    const std::vector<double> M = state_jacobian(cell, f);

    std::fill(Pn.begin(), Pn.end(), 0.0);
    for (int i = 0; i < J; ++i) {
      double* dst = Pn.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(C);
      for (int j = 0; j < J; ++j) {
        const double m = M[static_cast<std::size_t>(i) * static_cast<std::size_t>(J) +
                           static_cast<std::size_t>(j)];
        if (m == 0.0) continue;
        const double* src = P.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(C);
        for (long long c = 0; c < C; ++c) dst[c] += m * src[c];
      }
      for (std::size_t k = 0; k < f.size(); ++k) {
        dst[static_cast<long long>(i) * cols + f.col[k]] += phi[k];
      }
      dst[static_cast<long long>(J) * cols + i] += 1.0;
      const double d = z_new[static_cast<std::size_t>(i)] *
                       (1.0 - z_new[static_cast<std::size_t>(i)]);
      for (long long c = 0; c < C; ++c) dst[c] *= d;
    }
    P.swap(Pn);

    const double dyh = yhat - static_cast<double>(label);
    g.b_out += dyh;
    for (int i = 0; i < J; ++i) {
      g.w_out[static_cast<std::size_t>(i)] += dyh * z_new[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < J; ++i) {
      const double dzi = dyh * cell.out_weights()[i];
      if (dzi == 0.0) continue;
      const double* row = P.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(C);
      for (long long c = 0; c < static_cast<long long>(J) * cols; ++c) {
        g.w_state[static_cast<std::size_t>(c)] += dzi * row[c];
      }
      for (int b = 0; b < J; ++b) {
        g.b_state[static_cast<std::size_t>(b)] += dzi * row[static_cast<long long>(J) * cols + b];
      }
    }
    z = z_new;
  }
  return g;
}

CellGrad uoro_cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens,
                            int label, const std::vector<int>& schedule, Rng& rng) {
  constexpr double kFloor = 1e-7;
  const auto stream = effective_stream(tokens, schedule);
  const int J = cell.state_dim();
  const int cols = cell.weight_cols();
  const long long C = static_cast<long long>(J) * cols + J;

  CellGrad g = cell_zero_grad(cell);
  std::vector<double> zt(static_cast<std::size_t>(J), 0.0);     // rank-one state factor
  std::vector<double> tt(static_cast<std::size_t>(C), 0.0);     // rank-one theta factor
  std::vector<double> B(static_cast<std::size_t>(C));
  std::vector<double> A(static_cast<std::size_t>(J));
  std::vector<int> nu(static_cast<std::size_t>(J));
  std::vector<double> z = cell.initial_state(rng);

  auto norm2 = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };

  for (int token : stream) {
    const StepFeatures f = cell.step_features(z, token, rng);
    const auto phi = phi_values(f, z);
    std::vector<double> z_new;
    double yhat;
    smooth_step(cell, f, phi, z_new, yhat);
    const std::vector<double> M = state_jacobian(cell, f);

    // A = dF/dz . zt  (rows scaled by the sigmoid slope)
    for (int i = 0; i < J; ++i) {
      double acc = 0.0;
      for (int j = 0; j < J; ++j) {
        acc += M[static_cast<std::size_t>(i) * static_cast<std::size_t>(J) +
                 static_cast<std::size_t>(j)] *
               zt[static_cast<std::size_t>(j)];
      }
      A[static_cast<std::size_t>(i)] = acc * z_new[static_cast<std::size_t>(i)] *
                                       (1.0 - z_new[static_cast<std::size_t>(i)]);
    }
    // B = nu^T dF/dtheta
    for (int i = 0; i < J; ++i) nu[static_cast<std::size_t>(i)] = rng.sign();
    std::fill(B.begin(), B.end(), 0.0);
    for (int i = 0; i < J; ++i) {
      const double w = static_cast<double>(nu[static_cast<std::size_t>(i)]) *
                       z_new[static_cast<std::size_t>(i)] *
                       (1.0 - z_new[static_cast<std::size_t>(i)]);
      for (std::size_t k = 0; k < f.size(); ++k) {
        B[static_cast<std::size_t>(static_cast<long long>(i) * cols + f.col[k])] += w * phi[k];
      }
      B[static_cast<std::size_t>(static_cast<long long>(J) * cols + i)] += w;
    }

    const double rho0 = std::sqrt(norm2(tt) / std::max(norm2(A), kFloor));
    const double rho1 = std::sqrt(norm2(B) / std::sqrt(static_cast<double>(J)));
    const double inv0 = 1.0 / std::max(rho0, kFloor);
    const double inv1 = 1.0 / std::max(rho1, kFloor);
    for (int i = 0; i < J; ++i) {
      zt[static_cast<std::size_t>(i)] = rho0 * A[static_cast<std::size_t>(i)] +
                                        rho1 * static_cast<double>(nu[static_cast<std::size_t>(i)]);
    }
    for (long long c = 0; c < C; ++c) {
      tt[static_cast<std::size_t>(c)] =
          tt[static_cast<std::size_t>(c)] * inv0 + B[static_cast<std::size_t>(c)] * inv1;
    }

    const double dyh = yhat - static_cast<double>(label);
    g.b_out += dyh;
    for (int i = 0; i < J; ++i) {
      g.w_out[static_cast<std::size_t>(i)] += dyh * z_new[static_cast<std::size_t>(i)];
    }
    double q = 0.0;  // (dloss/dz') . zt, with Z~ = zt tt^T standing in for dz/dtheta
    for (int i = 0; i < J; ++i) {
      q += dyh * cell.out_weights()[i] * zt[static_cast<std::size_t>(i)];
    }
    if (q != 0.0) {
      for (long long c = 0; c < static_cast<long long>(J) * cols; ++c) {
        g.w_state[static_cast<std::size_t>(c)] += q * tt[static_cast<std::size_t>(c)];
      }
      for (int b = 0; b < J; ++b) {
        g.b_state[static_cast<std::size_t>(b)] +=
            q * tt[static_cast<std::size_t>(static_cast<long long>(J) * cols + b)];
      }
    }
    z = z_new;
  }
  return g;
}

CellGrad cell_gradient(RecurrentCell& cell, const std::vector<int>& tokens, int label,
                       const std::vector<int>& schedule, const OptimizerConfig& opt,
                       Rng& rng) {
  switch (opt.algo) {
    case Algorithm::bptt:
      return bptt_cell_gradient(cell, tokens, label, schedule, rng);
    case Algorithm::tbptt:
      return tbptt_cell_gradient(cell, tokens, label, schedule, opt.window, rng);
    case Algorithm::rtrl:
      return rtrl_cell_gradient(cell, tokens, label, schedule, opt.jacobian_cap, rng);
    case Algorithm::uoro:
      return uoro_cell_gradient(cell, tokens, label, schedule, rng);
  }
  throw std::logic_error("unreachable");
}

NspdaCell::NspdaCell(const ModelParams& params, const Alphabet& alphabet,
                     ReadMode read_mode)
    : params_(params), alphabet_(alphabet), read_mode_(read_mode) {
  if (alphabet.size() != params.L) {
    throw std::invalid_argument("NspdaCell: alphabet size mismatch");
  }
}

std::vector<double> NspdaCell::initial_state(Rng& rng) {
  stack_ = DigitalStack{};
  r_ = read_stack(stack_, std::nullopt, alphabet_, read_mode_, rng);
  std::vector<double> z(static_cast<std::size_t>(params_.J), 0.0);
  z[0] = 1.0;
  return z;
}

StepFeatures NspdaCell::step_features(const std::vector<double>& z, int token,
                                      Rng& rng) {
  const int J = params_.J, L = params_.L, R = params_.read_dim();
  if (token < 0 || token >= L) throw std::invalid_argument("token index out of range");
  StepFeatures f;
  if (params_.order == ModelOrder::third) {
    f.src.reserve(static_cast<std::size_t>(J * R));
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < R; ++k) {
        f.src.push_back(j);
        f.scale.push_back(r_[static_cast<std::size_t>(k)]);
        f.col.push_back(params_.col3(j, k, token));
      }
    }
  } else {
    for (int j = 0; j < J; ++j) {
      for (int k = 0; k < R; ++k) {
        f.src.push_back(j);
        f.scale.push_back(r_[static_cast<std::size_t>(k)]);
        f.col.push_back(params_.col2_read(j, k));
      }
      f.src.push_back(j);
      f.scale.push_back(1.0);
      f.col.push_back(params_.col2_input(j, token));
    }
  }

  // The stack still moves during training: quantized, arbitrated actions from
  // the current pre-activations.
  std::vector<double> u(static_cast<std::size_t>(L), 0.0);
  const auto phi = phi_values(f, z);
  const int cols = params_.cols();
  for (int c = 0; c < L; ++c) {
    double acc = params_.b_a[static_cast<std::size_t>(c)];
    const double* row = params_.W_a.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(cols);
    for (std::size_t k = 0; k < f.size(); ++k) acc += row[f.col[k]] * phi[k];
    u[static_cast<std::size_t>(c)] = acc;
  }
  ActionVec quant(static_cast<std::size_t>(L));
  for (int c = 0; c < L; ++c) quant[static_cast<std::size_t>(c)] = f_quant(u[static_cast<std::size_t>(c)]);
  const ActionVec action = arbitrate_action(u, quant);
  const auto popped = apply_action(stack_, action, alphabet_);
  r_ = read_stack(stack_, popped, alphabet_, read_mode_, rng);
  return f;
}

GradientBundle nspda_gradient(const ModelParams& params, const Alphabet& alphabet,
                              const std::vector<int>& tokens, int label,
                              const std::vector<int>& schedule,
                              const OptimizerConfig& opt, ReadMode read_mode, Rng& rng) {
  NspdaCell cell(params, alphabet, read_mode);
  const CellGrad cg = cell_gradient(cell, tokens, label, schedule, opt, rng);
  GradientBundle g;
  g.W_s = cg.w_state;
  g.b_s = cg.b_state;
  g.W_a.assign(params.W_a.size(), 0.0);
  g.b_a.assign(params.b_a.size(), 0.0);
  g.W_o = cg.w_out;
  g.b_o = cg.b_out;
  return g;
}

double nspda_sequence_loss(const ModelParams& params, const Alphabet& alphabet,
                           const std::vector<int>& tokens, int label,
                           const std::vector<int>& schedule, ReadMode read_mode,
                           Rng& rng) {
  NspdaCell cell(params, alphabet, read_mode);
  return cell_sequence_loss(cell, tokens, label, schedule, rng);
}

double learning_rate(const OptimizerConfig& opt, int epoch, Rng& rng) {
  double lr = opt.lr0 / (1.0 + static_cast<double>(epoch) / 100.0);
  if (opt.lr_mode == LrMode::stochastic) lr *= rng.uniform(0.5, 1.5);
  return lr;
}

namespace {

void clipped_update(std::vector<double>& w, const std::vector<double>& g, double clip,
                    double lr) {
  if (w.size() != g.size()) throw std::invalid_argument("sgd_step: shape mismatch");
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] -= lr * std::clamp(g[i], -clip, clip);
  }
}

}  // namespace

void sgd_step(ModelParams& params, const GradientBundle& grads,
              const OptimizerConfig& opt, int epoch, Rng& rng) {
  const double lr = learning_rate(opt, epoch, rng);
  clipped_update(params.W_s, grads.W_s, opt.clip, lr);
  clipped_update(params.b_s, grads.b_s, opt.clip, lr);
  clipped_update(params.W_a, grads.W_a, opt.clip, lr);
  clipped_update(params.b_a, grads.b_a, opt.clip, lr);
  clipped_update(params.W_o, grads.W_o, opt.clip, lr);
  params.b_o -= lr * std::clamp(grads.b_o, -opt.clip, opt.clip);
}

}  // namespace nspda
