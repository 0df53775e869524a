#include <doctest.h>

#include <cmath>
#include <vector>

#include "dbwqs/kernels.hpp"
#include "dbwqs/rng.hpp"
#include "dbwqs/special.hpp"

using namespace dbwqs;

namespace {

// Log-uniform positive values across the magnitudes the model produces
// (alpha = phi * mu can sit far below 1 or in the thousands).
std::vector<double> positive_grid(std::size_t n, Rng& rng, double lo = 1e-8,
                                  double hi = 1e6) {
  std::vector<double> x(n);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (auto& v : x) v = std::exp(rng.uniform(llo, lhi));
  return x;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("scalar digamma matches known values and lgamma differences") {
  // psi(1) = -gamma, psi(0.5) = -gamma - 2 log 2, psi(2) = 1 - gamma
  CHECK(digamma(1.0) == doctest::Approx(-0.57721566490153286).epsilon(1e-13));
  CHECK(digamma(0.5) == doctest::Approx(-1.9635100260214235).epsilon(1e-13));
  CHECK(digamma(2.0) == doctest::Approx(0.42278433509846714).epsilon(1e-13));
  // psi(x+1) - psi(x) = 1/x
  for (double x : {0.1, 0.7, 3.0, 25.0, 1e4}) {
    CHECK(digamma(x + 1.0) - digamma(x) ==
          doctest::Approx(1.0 / x).epsilon(1e-11));
  }
  // Central difference of lgamma approximates digamma.
  for (double x : {0.3, 1.5, 7.9, 120.0}) {
    const double h = 1e-6 * std::max(1.0, x);
    const double fd = (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h);
    CHECK(digamma(x) == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!kern::avx2_available()) {
    MESSAGE("AVX2 not available; equivalence checks skipped");
    return;
  }
  const auto& s = kern::scalar_backend();
  const auto& a = kern::avx2_backend();
  Rng rng(20240814);

  // Odd length exercises the remainder lanes.
  for (std::size_t n : {1u, 3u, 4u, 17u, 1000u}) {
    auto x = positive_grid(n, rng);
    std::vector<double> ys(n), ya(n);

    s.vlog(x.data(), ys.data(), n);
    a.vlog(x.data(), ya.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(ys[i], ya[i], 1e-14));

    s.vlgamma(x.data(), ys.data(), n);
    a.vlgamma(x.data(), ya.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(ys[i], ya[i], 5e-13));

    s.vdigamma(x.data(), ys.data(), n);
    a.vdigamma(x.data(), ya.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(ys[i], ya[i], 1e-12));

    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = rng.uniform(-690.0, 690.0);
    s.vexp(e.data(), ys.data(), n);
    a.vexp(e.data(), ya.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(ys[i], ya[i], 2e-15));

    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = rng.normal();
      v[i] = rng.normal();
    }
    CHECK(close_rel(s.dot(u.data(), v.data(), n), a.dot(u.data(), v.data(), n),
                    1e-12));
    CHECK(close_rel(s.sum(u.data(), n), a.sum(u.data(), n), 1e-12));

    std::vector<double> y1 = v, y2 = v;
    s.axpy(0.37, u.data(), y1.data(), n);
    a.axpy(0.37, u.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close_rel(y1[i], y2[i], 1e-14));
  }
}

TEST_CASE("AVX2 transcendentals track libm across the domain") {
  if (!kern::avx2_available()) return;
  const auto& a = kern::avx2_backend();
  Rng rng(7);
  auto x = positive_grid(4000, rng, 1e-10, 1e8);
  std::vector<double> out(x.size());

  a.vlog(x.data(), out.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(close_rel(out[i], std::log(x[i]), 1e-14));

  a.vlgamma(x.data(), out.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(close_rel(out[i], std::lgamma(x[i]), 5e-13));

  a.vexp(x.data(), out.data(), x.size());  // all overflow past 709 -> inf
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double expect = std::exp(std::min(x[i], 1e9));
    if (std::isinf(expect))
      CHECK(std::isinf(out[i]));
    else
      CHECK(close_rel(out[i], expect, 2e-15));
  }
}

TEST_CASE("backend selection") {
  CHECK(std::string(kern::scalar_backend().name) == "scalar");
  const auto& before = kern::active();
  kern::set_active(kern::scalar_backend());
  CHECK(std::string(kern::active().name) == "scalar");
  kern::set_active(before);
  CHECK_THROWS(kern::backend_by_name("neon"));
}
