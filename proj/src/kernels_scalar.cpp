#include "dbwqs/kernels.hpp"

#include <cmath>

#include "dbwqs/special.hpp"

// Reference backend.  Plain loops over libm; the AVX2 backend is
// equivalence-tested against these.

namespace dbwqs::kern {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vexp_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(x[i]);
}

void vlog_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(x[i]);
}

void vlgamma_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = log_gamma_fn(x[i]);
}

void vdigamma_scalar(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = digamma(x[i]);
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend backend{
      "scalar",      dot_scalar,  sum_scalar,     axpy_scalar,
      vexp_scalar,   vlog_scalar, vlgamma_scalar, vdigamma_scalar,
  };
  return backend;
}

}  // namespace dbwqs::kern
