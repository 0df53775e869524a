#pragma once

#include <cmath>

// Scalar special functions shared by the scalar kernel backend and the
// single-value call sites (priors, per-draw transforms).

namespace dbwqs {

inline constexpr double kLogTwoPi = 1.8378770664093454836;  // log(2*pi)
inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;

// log |Gamma(x)| without touching the global signgam that POSIX lgamma
// writes (chains evaluate this concurrently).
inline double log_gamma_fn(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

// Digamma for x > 0: recurrence up to x >= 8, then the Bernoulli asymptotic
// series in 1/x^2.  Absolute error below ~2e-15 over the positive reals.
inline double digamma(double x) {
  double acc = 0.0;
  while (x < 8.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double w = 1.0 / (x * x);
  const double corr =
      w * (1.0 / 12.0 -
           w * (1.0 / 120.0 -
                w * (1.0 / 252.0 -
                     w * (1.0 / 240.0 -
                          w * (1.0 / 132.0 -
                               w * (691.0 / 32760.0 - w * (1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 / x - corr;
}

// log N(x | 0, sigma) with normalizing constant included.
inline double log_normal_density(double x, double sigma) {
  return -kHalfLogTwoPi - std::log(sigma) - 0.5 * x * x / (sigma * sigma);
}

// log Gamma(x | shape a, rate b) with normalizing constant included.
inline double log_gamma_density(double x, double a, double b) {
  return a * std::log(b) - log_gamma_fn(a) + (a - 1.0) * std::log(x) - b * x;
}

}  // namespace dbwqs
