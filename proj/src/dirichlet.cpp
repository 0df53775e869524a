#include "dbwqs/dirichlet.hpp"

#include "dbwqs/special.hpp"

#include <cmath>
#include <stdexcept>

namespace dbwqs {

void validate_simplex(std::span<const double> y, double tol) {
  double total = 0.0;
  for (double v : y) {
    if (!(v > 0.0)) throw std::domain_error("simplex entry must be > 0");
    total += v;
  }
  if (std::abs(total - 1.0) > tol)
    throw std::domain_error("simplex entries must sum to 1");
}

double dirichlet_log_density(std::span<const double> y,
                             std::span<const double> alpha) {
  if (y.size() != alpha.size())
    throw std::invalid_argument("dimension mismatch between y and alpha");
  validate_simplex(y);
  double alpha_sum = 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double a = alpha[k];
    if (!(a > 0.0)) throw std::domain_error("alpha entries must be > 0");
    alpha_sum += a;
    acc += (a - 1.0) * std::log(y[k]) - log_gamma_fn(a);
  }
  return log_gamma_fn(alpha_sum) + acc;
}

double dirichlet_log_density_mean_precision(std::span<const double> y,
                                            std::span<const double> mu,
                                            double phi) {
  if (!(phi > 0.0)) throw std::domain_error("phi must be > 0");
  std::vector<double> alpha(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) alpha[k] = phi * mu[k];
  return dirichlet_log_density(y, alpha);
}

double sample_gamma(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw std::domain_error("gamma shape must be > 0");
  if (shape < 1.0) {
    // Boost: Gamma(a) = Gamma(a+1) * U^(1/a)
    const double g = sample_gamma(shape + 1.0, rng);
    return g * std::pow(rng.uniform01(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform01();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng) {
  constexpr int kMaxRetries = 100;
  std::vector<double> out(alpha.size());
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    double total = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      if (!(alpha[k] > 0.0))
        throw std::domain_error("dirichlet alpha entries must be > 0");
      out[k] = sample_gamma(alpha[k], rng);
      total += out[k];
    }
    bool ok = total > 0.0 && std::isfinite(total);
    if (ok) {
      for (double& v : out) {
        v /= total;
        if (!(v > 0.0) || !std::isfinite(v)) {
          ok = false;
          break;
        }
      }
    }
    if (ok) return out;
  }
  throw std::runtime_error(
      "dirichlet draw kept producing zero components (alpha too extreme)");
}

}  // namespace dbwqs
