#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dbwqs/dirichlet.hpp"
#include "dbwqs/rng.hpp"

using namespace dbwqs;

namespace {

std::vector<double> random_simplex(std::size_t k, Rng& rng) {
  std::vector<double> g(k);
  double total = 0.0;
  for (auto& v : g) {
    v = -std::log(rng.uniform01());
    total += v;
  }
  for (auto& v : g) v /= total;
  return g;
}

}  // namespace

TEST_CASE("standard log density: pinned values") {
  // Uniform Dirichlet on K=3 has constant density Gamma(3) = 2.
  CHECK(dirichlet_log_density(std::vector{0.2, 0.3, 0.5},
                              std::vector{1.0, 1.0, 1.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Beta(2,2) at 1/2: 6 * x(1-x) = 1.5.
  CHECK(dirichlet_log_density(std::vector{0.5, 0.5}, std::vector{2.0, 2.0}) ==
        doctest::Approx(std::log(1.5)).epsilon(1e-12));
  // Beta(3,1) at 0.1: 3 x^2 = 0.03.
  CHECK(dirichlet_log_density(std::vector{0.1, 0.9}, std::vector{3.0, 1.0}) ==
        doctest::Approx(std::log(0.03)).epsilon(1e-12));
}

TEST_CASE("mean-precision form reduces to the standard form") {
  const std::vector<double> third{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(dirichlet_log_density_mean_precision(std::vector{0.2, 0.3, 0.5}, third,
                                             3.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(dirichlet_log_density_mean_precision(std::vector{0.5, 0.5},
                                             std::vector{0.5, 0.5}, 4.0) ==
        doctest::Approx(std::log(1.5)).epsilon(1e-12));

  // alpha = phi * mu identity on random inputs.
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform01() * 5);
    const auto y = random_simplex(k, rng);
    const auto mu = random_simplex(k, rng);
    const double phi = std::exp(rng.uniform(-4.0, 7.0));
    std::vector<double> alpha(k);
    for (std::size_t i = 0; i < k; ++i) alpha[i] = phi * mu[i];
    const double a = dirichlet_log_density_mean_precision(y, mu, phi);
    const double b = dirichlet_log_density(y, alpha);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)));
  }
}

TEST_CASE("log density is permutation equivariant") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto y = random_simplex(4, rng);
    std::vector<double> alpha(4);
    for (auto& a : alpha) a = std::exp(rng.uniform(-2.0, 3.0));
    const double base = dirichlet_log_density(y, alpha);
    std::vector<std::size_t> perm{2, 0, 3, 1};
    std::vector<double> yp(4), ap(4);
    for (std::size_t i = 0; i < 4; ++i) {
      yp[i] = y[perm[i]];
      ap[i] = alpha[perm[i]];
    }
    CHECK(dirichlet_log_density(yp, ap) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("K=3 grid normalization") {
  // Midpoint rule over the (y1, y2) triangle at step 0.005.
  const double h = 0.005;
  for (const auto& alpha :
       {std::vector{1.0, 1.0, 1.0}, std::vector{2.0, 3.0, 4.0},
        std::vector{5.0, 2.0, 2.0}}) {
    double total = 0.0;
    for (double y1 = h / 2; y1 < 1.0; y1 += h) {
      for (double y2 = h / 2; y1 + y2 < 1.0; y2 += h) {
        const double y3 = 1.0 - y1 - y2;
        if (y3 <= 0.0) continue;
        total +=
            std::exp(dirichlet_log_density(std::vector{y1, y2, y3}, alpha)) *
            h * h;
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(2e-2));
  }
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(
      dirichlet_log_density(std::vector{0.0, 1.0}, std::vector{1.0, 1.0}),
      std::domain_error);
  CHECK_THROWS_AS(
      dirichlet_log_density(std::vector{0.4, 0.4}, std::vector{1.0, 1.0}),
      std::domain_error);  // does not sum to 1
  CHECK_THROWS_AS(
      dirichlet_log_density(std::vector{0.5, 0.5}, std::vector{1.0}),
      std::invalid_argument);
  CHECK_THROWS_AS(dirichlet_log_density_mean_precision(
                      std::vector{0.5, 0.5}, std::vector{0.5, 0.5}, 0.0),
                  std::domain_error);
  CHECK_THROWS_AS(
      dirichlet_log_density(std::vector{0.5, 0.5}, std::vector{1.0, -2.0}),
      std::domain_error);
}

TEST_CASE("sampling: concentration at the mean for huge alpha") {
  Rng rng(123);
  for (int draw = 0; draw < 20; ++draw) {
    const auto y = sample_dirichlet(std::vector{1e6, 1e6}, rng);
    CHECK(y[0] == doctest::Approx(0.5).epsilon(0.02));
    CHECK(y[0] + y[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("sampling: Monte Carlo moments for uniform alpha") {
  Rng rng(2024);
  std::vector<double> mean(3, 0.0);
  const int n = 10000;
  for (int draw = 0; draw < n; ++draw) {
    const auto y = sample_dirichlet(std::vector{1.0, 1.0, 1.0}, rng);
    for (int k = 0; k < 3; ++k) mean[k] += y[k];
  }
  for (int k = 0; k < 3; ++k)
    CHECK(mean[k] / n == doctest::Approx(1.0 / 3).epsilon(0.06));
}

TEST_CASE("sampling with hopeless alpha gives up after bounded retries") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_dirichlet(std::vector{1e-300, 1e-300}, rng),
                  std::runtime_error);
}

TEST_CASE("sampling is deterministic given the seed") {
  Rng a(7), b(7);
  const auto y1 = sample_dirichlet(std::vector{0.5, 2.0, 5.0}, a);
  const auto y2 = sample_dirichlet(std::vector{0.5, 2.0, 5.0}, b);
  CHECK(y1 == y2);
}

TEST_CASE("gamma sampler moments, including the shape < 1 boost") {
  Rng rng(31);
  for (double shape : {0.3, 1.0, 4.5}) {
    double mean = 0.0, m2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double g = sample_gamma(shape, rng);
      mean += g;
      m2 += g * g;
    }
    mean /= n;
    const double var = m2 / n - mean * mean;
    CHECK(mean == doctest::Approx(shape).epsilon(0.05));
    CHECK(var == doctest::Approx(shape).epsilon(0.12));
  }
}
