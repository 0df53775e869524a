#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Vectorizable inner-loop kernels behind a runtime-dispatched backend table.
//
// The scalar backend is the reference semantics; the AVX2 backend must agree
// with it to the tolerances pinned in the kernel equivalence tests.  Every
// kernel operates on plain double arrays; transcendental kernels assume
// strictly positive inputs where noted.  vexp flushes results below the
// smallest normal double (inputs < -708.4) to zero.

namespace dbwqs::kern {

struct Backend {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*vexp)(const double* x, double* out, std::size_t n);
  // x > 0
  void (*vlog)(const double* x, double* out, std::size_t n);
  // x > 0
  void (*vlgamma)(const double* x, double* out, std::size_t n);
  // x > 0
  void (*vdigamma)(const double* x, double* out, std::size_t n);
};

const Backend& scalar_backend();

// True when the binary carries the AVX2 kernels and the CPU can run them.
bool avx2_available();
// Precondition: avx2_available().
const Backend& avx2_backend();

// Selected once per process: DBWQS_KERNELS=scalar|avx2 overrides, otherwise
// AVX2 when available.  set_active() exists for tests that exercise both
// paths through higher-level code; it is not synchronized against concurrent
// kernel use.
const Backend& active();
void set_active(const Backend& backend);
const Backend& backend_by_name(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) {
  return active().sum(a.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void vexp(std::span<const double> x, std::span<double> out) {
  active().vexp(x.data(), out.data(), x.size());
}
inline void vlog(std::span<const double> x, std::span<double> out) {
  active().vlog(x.data(), out.data(), x.size());
}
inline void vlgamma(std::span<const double> x, std::span<double> out) {
  active().vlgamma(x.data(), out.data(), x.size());
}
inline void vdigamma(std::span<const double> x, std::span<double> out) {
  active().vdigamma(x.data(), out.data(), x.size());
}

}  // namespace dbwqs::kern
