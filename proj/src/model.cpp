#include "dbwqs/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dbwqs/dirichlet.hpp"
#include "dbwqs/kernels.hpp"
#include "dbwqs/special.hpp"

namespace dbwqs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sigmoid(double t) {
  return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

// Stick-breaking transform with the logistic link and per-segment offset
// log(1/(M-1-m)), so all-zero latents give the uniform simplex point.
// Fills w (M), z (M-1), rem (M, remaining stick before each segment) and
// accumulates the log Jacobian.
void stick_forward(std::span<const double> u, std::span<double> w,
                   std::span<double> z, std::span<double> rem,
                   double& log_jacobian) {
  const std::size_t m_count = w.size();
  rem[0] = 1.0;
  double log_rem = 0.0;
  for (std::size_t m = 0; m + 1 < m_count; ++m) {
    const double t = u[m] - std::log(static_cast<double>(m_count - 1 - m));
    const double lz = log_sigmoid(t);
    const double l1mz = log_sigmoid(-t);
    z[m] = std::exp(lz);
    w[m] = rem[m] * z[m];
    log_jacobian += lz + l1mz + log_rem;
    rem[m + 1] = rem[m] * (1.0 - z[m]);
    log_rem += l1mz;
  }
  w[m_count - 1] = rem[m_count - 1];
}

}  // namespace

void PriorConfig::validate() const {
  if (!(sigma_beta > 0.0) || !(sigma_theta > 0.0) || !(a_phi > 0.0) ||
      !(b_phi > 0.0) || !(a_pi > 0.0) || !(b_pi > 0.0))
    throw std::invalid_argument("prior hyperparameters must be > 0");
}

DbwqsData DbwqsData::create(Matrix y, QuantileMatrix q, Matrix x) {
  const std::size_t n = y.rows();
  if (y.cols() < 2)
    throw std::invalid_argument("outcome needs at least 2 categories");
  if (q.rows != n) throw std::invalid_argument("y and q row counts differ");
  if (x.cols() == 0) {
    x = Matrix(n, 0);
  } else if (x.rows() != n) {
    throw std::invalid_argument("y and x row counts differ");
  }
  if (q.n_quantiles < 2)
    throw std::invalid_argument("quantile matrix needs n_quantiles >= 2");
  for (int s : q.scores)
    if (s < 0 || s > q.n_quantiles - 1)
      throw std::invalid_argument("quantile score out of range");
  for (std::size_t i = 0; i < n; ++i) validate_simplex(y.row(i));
  return DbwqsData{std::move(y), std::move(q), std::move(x)};
}

void apply_zero_policy(Matrix& y, ZeroPolicy policy, double epsilon) {
  if (policy == ZeroPolicy::kReject) return;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    bool changed = false;
    for (std::size_t k = 0; k < y.cols(); ++k) {
      if (y(i, k) == 0.0) {
        y(i, k) = epsilon;
        changed = true;
      }
    }
    if (changed) {
      double total = 0.0;
      for (std::size_t k = 0; k < y.cols(); ++k) total += y(i, k);
      for (std::size_t k = 0; k < y.cols(); ++k) y(i, k) /= total;
    }
  }
}

ConstrainResult constrain(std::span<const double> v, const ModelDims& dims) {
  if (v.size() != dims.dim())
    throw std::invalid_argument("unconstrained vector has wrong dimension");
  ConstrainResult out;
  auto& s = out.state;
  s.theta.assign(dims.K, 0.0);
  for (std::size_t k = 1; k < dims.K; ++k) s.theta[k] = v[k - 1];
  s.beta = Matrix(dims.K, dims.J);
  for (std::size_t k = 1; k < dims.K; ++k)
    for (std::size_t j = 0; j < dims.J; ++j)
      s.beta(k, j) = v[dims.beta_offset() + (k - 1) * dims.J + j];

  s.w.resize(dims.M);
  std::vector<double> z(dims.M > 0 ? dims.M - 1 : 0), rem(dims.M);
  stick_forward(v.subspan(dims.stick_offset(), dims.M - 1), s.w, z, rem,
                out.log_jacobian);

  s.pi.resize(dims.M);
  for (std::size_t m = 0; m < dims.M; ++m) {
    const double lp = v[dims.logpi_offset() + m];
    s.pi[m] = std::exp(lp);
    out.log_jacobian += lp;
  }
  const double lf = v[dims.logphi_offset()];
  s.phi = std::exp(lf);
  out.log_jacobian += lf;
  return out;
}

std::vector<double> unconstrain(const ParameterState& state,
                                const ModelDims& dims) {
  std::vector<double> v(dims.dim());
  for (std::size_t k = 1; k < dims.K; ++k) v[k - 1] = state.theta[k];
  for (std::size_t k = 1; k < dims.K; ++k)
    for (std::size_t j = 0; j < dims.J; ++j)
      v[dims.beta_offset() + (k - 1) * dims.J + j] = state.beta(k, j);
  double rem = 1.0;
  for (std::size_t m = 0; m + 1 < dims.M; ++m) {
    const double zm = state.w[m] / rem;
    v[dims.stick_offset() + m] = std::log(zm) - std::log1p(-zm) +
                                 std::log(static_cast<double>(dims.M - 1 - m));
    rem -= state.w[m];
  }
  for (std::size_t m = 0; m < dims.M; ++m)
    v[dims.logpi_offset() + m] = std::log(state.pi[m]);
  v[dims.logphi_offset()] = std::log(state.phi);
  return v;
}

double mixture_index(std::span<const int> q_row, std::span<const double> w) {
  if (q_row.size() != w.size())
    throw std::invalid_argument("q row and w dimension mismatch");
  double s = 0.0;
  for (std::size_t m = 0; m < w.size(); ++m) s += q_row[m] * w[m];
  return s;
}

Matrix compute_means(std::span<const double> S, const Matrix& x,
                     std::span<const double> theta, const Matrix& beta) {
  const std::size_t n = S.size();
  const std::size_t K = theta.size();
  const std::size_t J = x.cols();
  if (beta.rows() != K || beta.cols() != J)
    throw std::invalid_argument("beta shape does not match theta/x");
  Matrix mu(n, K);
  std::vector<double> eta(K);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      double lin = S[i] * theta[k];
      for (std::size_t j = 0; j < J; ++j) lin += x(i, j) * beta(k, j);
      if (!std::isfinite(lin))
        throw std::domain_error("non-finite linear predictor");
      eta[k] = lin;
      mx = std::max(mx, lin);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      eta[k] = std::exp(eta[k] - mx);
      denom += eta[k];
    }
    for (std::size_t k = 0; k < K; ++k) mu(i, k) = eta[k] / denom;
  }
  return mu;
}

std::size_t constrained_size(const ModelDims& dims) {
  return (dims.K - 1) * (1 + dims.J) + 2 * dims.M + 1;
}

std::vector<std::string> constrained_names(const ModelDims& dims) {
  std::vector<std::string> names;
  names.reserve(constrained_size(dims));
  for (std::size_t k = 2; k <= dims.K; ++k)
    names.push_back("theta_" + std::to_string(k));
  for (std::size_t k = 2; k <= dims.K; ++k)
    for (std::size_t j = 1; j <= dims.J; ++j)
      names.push_back("beta_" + std::to_string(k) + "_" + std::to_string(j));
  for (std::size_t m = 1; m <= dims.M; ++m)
    names.push_back("w_" + std::to_string(m));
  for (std::size_t m = 1; m <= dims.M; ++m)
    names.push_back("pi_" + std::to_string(m));
  names.push_back("phi");
  return names;
}

std::vector<double> flatten_constrained(const ParameterState& state) {
  std::vector<double> flat;
  const std::size_t K = state.theta.size();
  const std::size_t J = state.beta.cols();
  flat.reserve((K - 1) * (1 + J) + 2 * state.w.size() + 1);
  for (std::size_t k = 1; k < K; ++k) flat.push_back(state.theta[k]);
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t j = 0; j < J; ++j) flat.push_back(state.beta(k, j));
  flat.insert(flat.end(), state.w.begin(), state.w.end());
  flat.insert(flat.end(), state.pi.begin(), state.pi.end());
  flat.push_back(state.phi);
  return flat;
}

ParameterState state_from_constrained(std::span<const double> flat,
                                      const ModelDims& dims) {
  ParameterState s;
  s.theta.assign(dims.K, 0.0);
  std::size_t pos = 0;
  for (std::size_t k = 1; k < dims.K; ++k) s.theta[k] = flat[pos++];
  s.beta = Matrix(dims.K, dims.J);
  for (std::size_t k = 1; k < dims.K; ++k)
    for (std::size_t j = 0; j < dims.J; ++j) s.beta(k, j) = flat[pos++];
  s.w.assign(flat.begin() + pos, flat.begin() + pos + dims.M);
  pos += dims.M;
  s.pi.assign(flat.begin() + pos, flat.begin() + pos + dims.M);
  pos += dims.M;
  s.phi = flat[pos];
  return s;
}

DbwqsModel::DbwqsModel(DbwqsData data, PriorConfig priors)
    : data_(std::move(data)), priors_(priors) {
  priors_.validate();
  dims_ = ModelDims{data_.n(), data_.n_categories(), data_.n_exposures(),
                    data_.n_covariates()};
  if (dims_.K < 2) throw std::invalid_argument("need at least 2 categories");
  if (dims_.M < 1) throw std::invalid_argument("need at least 1 exposure");

  const std::size_t n = dims_.n;
  logy_cm_.resize(n * dims_.K);
  for (std::size_t k = 0; k < dims_.K; ++k)
    for (std::size_t i = 0; i < n; ++i)
      logy_cm_[k * n + i] = std::log(data_.y(i, k));
  sum_logy_ = kern::sum(logy_cm_);

  q_cm_.resize(n * dims_.M);
  for (std::size_t m = 0; m < dims_.M; ++m)
    for (std::size_t i = 0; i < n; ++i)
      q_cm_[m * n + i] = static_cast<double>(data_.q.at(i, m));

  x_cm_.resize(n * dims_.J);
  for (std::size_t j = 0; j < dims_.J; ++j)
    for (std::size_t i = 0; i < n; ++i) x_cm_[j * n + i] = data_.x(i, j);
}

DbwqsModel::Workspace DbwqsModel::make_workspace() const {
  Workspace ws;
  const std::size_t n = dims_.n, K = dims_.K, M = dims_.M, J = dims_.J;
  ws.theta.resize(K);
  ws.beta.resize(K * J);
  ws.w.resize(M);
  ws.pi.resize(M);
  ws.lnw.resize(M);
  ws.z.resize(M > 0 ? M - 1 : 0);
  ws.rem.resize(M);
  ws.S.resize(n);
  ws.rowmax.resize(n);
  ws.denom.resize(n);
  ws.r.resize(n);
  ws.dS.resize(n);
  ws.eta.resize(n * K);
  ws.e.resize(n * K);
  ws.mu.resize(n * K);
  ws.alpha.resize(n * K);
  ws.lg.resize(n * K);
  ws.ps.resize(n * K);
  ws.gw.resize(M);
  return ws;
}

double DbwqsModel::eval(std::span<const double> v, std::span<double> grad,
                        bool want_grad, Workspace& ws) const {
  const std::size_t n = dims_.n, K = dims_.K, M = dims_.M, J = dims_.J;
  if (v.size() != dims_.dim())
    throw std::invalid_argument("parameter vector has wrong dimension");
  if (want_grad) {
    if (grad.size() != dims_.dim())
      throw std::invalid_argument("gradient vector has wrong dimension");
    std::fill(grad.begin(), grad.end(), 0.0);
  }

  ws.theta[0] = 0.0;
  for (std::size_t k = 1; k < K; ++k) ws.theta[k] = v[k - 1];
  std::fill(ws.beta.begin(), ws.beta.begin() + J, 0.0);
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t j = 0; j < J; ++j)
      ws.beta[k * J + j] = v[dims_.beta_offset() + (k - 1) * J + j];

  double log_jacobian = 0.0;
  stick_forward(v.subspan(dims_.stick_offset(), M - 1), ws.w, ws.z, ws.rem,
                log_jacobian);
  for (std::size_t m = 0; m < M; ++m) {
    const double lp = v[dims_.logpi_offset() + m];
    ws.pi[m] = std::exp(lp);
    log_jacobian += lp;
    if (!(ws.pi[m] > 0.0) || !std::isfinite(ws.pi[m])) return kNegInf;
  }
  const double phi = std::exp(v[dims_.logphi_offset()]);
  log_jacobian += v[dims_.logphi_offset()];
  if (!(phi > 0.0) || !std::isfinite(phi)) return kNegInf;
  for (std::size_t m = 0; m < M; ++m) {
    if (!(ws.w[m] > 0.0)) return kNegInf;
    ws.lnw[m] = std::log(ws.w[m]);
  }

  const auto& kb = kern::active();
  double value = log_jacobian;
  double dphi_ll = 0.0;

  if (n > 0) {
    // S = Q w
    std::fill(ws.S.begin(), ws.S.end(), 0.0);
    for (std::size_t m = 0; m < M; ++m)
      kb.axpy(ws.w[m], q_cm_.data() + m * n, ws.S.data(), n);

    // Linear predictors, column per category; reference column stays zero.
    std::fill(ws.eta.begin(), ws.eta.begin() + n, 0.0);
    for (std::size_t k = 1; k < K; ++k) {
      double* col = ws.eta.data() + k * n;
      std::fill(col, col + n, 0.0);
      kb.axpy(ws.theta[k], ws.S.data(), col, n);
      for (std::size_t j = 0; j < J; ++j)
        kb.axpy(ws.beta[k * J + j], x_cm_.data() + j * n, col, n);
    }

    // Shifted softmax over the K columns.
    std::fill(ws.rowmax.begin(), ws.rowmax.end(), 0.0);
    for (std::size_t k = 1; k < K; ++k) {
      const double* col = ws.eta.data() + k * n;
      for (std::size_t i = 0; i < n; ++i)
        ws.rowmax[i] = std::max(ws.rowmax[i], col[i]);
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double* col = ws.eta.data() + k * n;
      double* out = ws.e.data() + k * n;
      for (std::size_t i = 0; i < n; ++i) out[i] = col[i] - ws.rowmax[i];
    }
    kb.vexp(ws.e.data(), ws.e.data(), n * K);
    std::fill(ws.denom.begin(), ws.denom.end(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const double* col = ws.e.data() + k * n;
      for (std::size_t i = 0; i < n; ++i) ws.denom[i] += col[i];
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double* col = ws.e.data() + k * n;
      double* out = ws.mu.data() + k * n;
      for (std::size_t i = 0; i < n; ++i) out[i] = col[i] / ws.denom[i];
    }

    for (std::size_t idx = 0; idx < n * K; ++idx)
      ws.alpha[idx] = phi * ws.mu[idx];
    kb.vlgamma(ws.alpha.data(), ws.lg.data(), n * K);
    const double loglik = static_cast<double>(n) * log_gamma_fn(phi) -
                          kb.sum(ws.lg.data(), n * K) +
                          kb.dot(ws.alpha.data(), logy_cm_.data(), n * K) -
                          sum_logy_;
    if (!std::isfinite(loglik)) return kNegInf;
    value += loglik;

    if (want_grad) {
      kb.vdigamma(ws.alpha.data(), ws.ps.data(), n * K);
      dphi_ll = static_cast<double>(n) * digamma(phi) +
                kb.dot(ws.mu.data(), logy_cm_.data(), n * K) -
                kb.dot(ws.mu.data(), ws.ps.data(), n * K);
      // d loglik / d mu, then backprop through the softmax in place.
      for (std::size_t idx = 0; idx < n * K; ++idx)
        ws.ps[idx] = phi * (logy_cm_[idx] - ws.ps[idx]);
      std::fill(ws.r.begin(), ws.r.end(), 0.0);
      for (std::size_t k = 0; k < K; ++k) {
        const double* mu = ws.mu.data() + k * n;
        const double* g = ws.ps.data() + k * n;
        for (std::size_t i = 0; i < n; ++i) ws.r[i] += mu[i] * g[i];
      }
      for (std::size_t k = 0; k < K; ++k) {
        const double* mu = ws.mu.data() + k * n;
        double* g = ws.ps.data() + k * n;
        for (std::size_t i = 0; i < n; ++i) g[i] = mu[i] * (g[i] - ws.r[i]);
      }

      std::fill(ws.dS.begin(), ws.dS.end(), 0.0);
      for (std::size_t k = 1; k < K; ++k) {
        const double* bp = ws.ps.data() + k * n;
        grad[dims_.theta_offset() + k - 1] += kb.dot(bp, ws.S.data(), n);
        for (std::size_t j = 0; j < J; ++j)
          grad[dims_.beta_offset() + (k - 1) * J + j] +=
              kb.dot(bp, x_cm_.data() + j * n, n);
        kb.axpy(ws.theta[k], bp, ws.dS.data(), n);
      }
      for (std::size_t m = 0; m < M; ++m)
        ws.gw[m] = kb.dot(ws.dS.data(), q_cm_.data() + m * n, n);
    }
  } else if (want_grad) {
    std::fill(ws.gw.begin(), ws.gw.end(), 0.0);
  }

  // Priors.  Reference-category coefficients are fixed at zero and carry no
  // prior term.
  const double st = priors_.sigma_theta, sb = priors_.sigma_beta;
  for (std::size_t k = 1; k < K; ++k) {
    value += log_normal_density(ws.theta[k], st);
    if (want_grad)
      grad[dims_.theta_offset() + k - 1] -= ws.theta[k] / (st * st);
    for (std::size_t j = 0; j < J; ++j) {
      const double b = ws.beta[k * J + j];
      value += log_normal_density(b, sb);
      if (want_grad)
        grad[dims_.beta_offset() + (k - 1) * J + j] -= b / (sb * sb);
    }
  }

  double pi_sum = 0.0;
  for (std::size_t m = 0; m < M; ++m) pi_sum += ws.pi[m];
  value += log_gamma_fn(pi_sum);
  for (std::size_t m = 0; m < M; ++m) {
    value += -log_gamma_fn(ws.pi[m]) + (ws.pi[m] - 1.0) * ws.lnw[m];
    value += log_gamma_density(ws.pi[m], priors_.a_pi, priors_.b_pi);
  }
  value += log_gamma_density(phi, priors_.a_phi, priors_.b_phi);
  if (!std::isfinite(value)) return kNegInf;

  if (want_grad) {
    for (std::size_t m = 0; m < M; ++m)
      ws.gw[m] += (ws.pi[m] - 1.0) / ws.w[m];
    const double dg_sum = digamma(pi_sum);
    for (std::size_t m = 0; m < M; ++m) {
      const double dpi = dg_sum - digamma(ws.pi[m]) + ws.lnw[m] +
                         (priors_.a_pi - 1.0) / ws.pi[m] - priors_.b_pi;
      grad[dims_.logpi_offset() + m] += ws.pi[m] * dpi + 1.0;
    }
    const double dphi = dphi_ll + (priors_.a_phi - 1.0) / phi - priors_.b_phi;
    grad[dims_.logphi_offset()] += phi * dphi + 1.0;

    // Reverse pass through the stick-breaking chain, including the Jacobian's
    // own dependence on z and the remaining stick.
    if (M >= 2) {
      double grem = ws.gw[M - 1];
      for (std::size_t mi = M - 1; mi-- > 0;) {
        const double zm = ws.z[mi];
        const double remm = ws.rem[mi];
        const double dz =
            (ws.gw[mi] - grem) * remm + 1.0 / zm - 1.0 / (1.0 - zm);
        const double drem = ws.gw[mi] * zm + grem * (1.0 - zm) + 1.0 / remm;
        grad[dims_.stick_offset() + mi] += dz * zm * (1.0 - zm);
        grem = drem;
      }
    }
    for (double g : grad)
      if (!std::isfinite(g)) return kNegInf;
  }
  return value;
}

double DbwqsModel::log_posterior_grad(std::span<const double> v,
                                      std::span<double> grad,
                                      Workspace& ws) const {
  return eval(v, grad, true, ws);
}

double DbwqsModel::log_posterior(std::span<const double> v,
                                 Workspace& ws) const {
  return eval(v, {}, false, ws);
}

double DbwqsModel::log_posterior(std::span<const double> v) const {
  Workspace ws = make_workspace();
  return eval(v, {}, false, ws);
}

double DbwqsModel::log_posterior_constrained(
    const ParameterState& state) const {
  const std::size_t n = dims_.n, K = dims_.K, M = dims_.M, J = dims_.J;
  double value = 0.0;

  if (n > 0) {
    std::vector<double> S(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t m = 0; m < M; ++m) s += data_.q.at(i, m) * state.w[m];
      S[i] = s;
    }
    const Matrix mu = compute_means(S, data_.x, state.theta, state.beta);
    for (std::size_t i = 0; i < n; ++i)
      value += dirichlet_log_density_mean_precision(data_.y.row(i), mu.row(i),
                                                    state.phi);
  }

  for (std::size_t k = 1; k < K; ++k)
    value += log_normal_density(state.theta[k], priors_.sigma_theta);
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t j = 0; j < J; ++j)
      value += log_normal_density(state.beta(k, j), priors_.sigma_beta);
  value += dirichlet_log_density(state.w, state.pi);
  for (std::size_t m = 0; m < M; ++m)
    value += log_gamma_density(state.pi[m], priors_.a_pi, priors_.b_pi);
  value += log_gamma_density(state.phi, priors_.a_phi, priors_.b_phi);
  return value;
}

}  // namespace dbwqs
