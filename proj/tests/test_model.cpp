#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dbwqs/kernels.hpp"
#include "dbwqs/model.hpp"
#include "dbwqs/rng.hpp"
#include "oracles.hpp"

using namespace dbwqs;

namespace {

std::vector<double> random_state(const ModelDims& dims, Rng& rng,
                                 double scale = 1.0) {
  std::vector<double> v(dims.dim());
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_CASE("constrain: centering, exp transforms, Jacobian bookkeeping") {
  ModelDims dims{0, 3, 4, 2};
  std::vector<double> v(dims.dim(), 0.0);
  auto [state, jac0] = constrain(v, dims);
  CHECK(state.theta[0] == 0.0);
  for (double wm : state.w) CHECK(wm == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(state.phi == 1.0);
  for (double p : state.pi) CHECK(p == 1.0);

  // log phi latent contributes itself to the Jacobian.
  v[dims.logphi_offset()] = 1.3;
  auto [state2, jac1] = constrain(v, dims);
  CHECK(state2.phi == doctest::Approx(std::exp(1.3)).epsilon(1e-14));
  CHECK(jac1 - jac0 == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("constrain matches the straight-line transform oracle") {
  ModelDims dims{0, 4, 5, 3};
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto v = random_state(dims, rng, 2.0);
    const auto lib = constrain(v, dims);
    const auto ora = oracle::constrain(v, dims.K, dims.M, dims.J);
    for (std::size_t k = 0; k < dims.K; ++k)
      CHECK(lib.state.theta[k] == doctest::Approx(ora.theta[k]));
    for (std::size_t m = 0; m < dims.M; ++m) {
      CHECK(lib.state.w[m] == doctest::Approx(ora.w[m]).epsilon(1e-12));
      CHECK(lib.state.pi[m] == doctest::Approx(ora.pi[m]).epsilon(1e-12));
    }
    CHECK(lib.log_jacobian ==
          doctest::Approx(ora.log_jacobian).epsilon(1e-10));
    const double wsum =
        std::accumulate(lib.state.w.begin(), lib.state.w.end(), 0.0);
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("constrain/unconstrain round trip") {
  ModelDims dims{0, 3, 6, 2};
  Rng rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = random_state(dims, rng, 2.0);
    const auto back = unconstrain(constrain(v, dims).state, dims);
    for (std::size_t d = 0; d < v.size(); ++d)
      worst = std::max(worst, std::abs(back[d] - v[d]));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("mixture index") {
  CHECK(mixture_index(std::vector{2, 3, 1}, std::vector{0.8, 0.0, 0.2}) ==
        doctest::Approx(1.8).epsilon(1e-15));
  // Uniform weights with constant scores give back the score.
  CHECK(mixture_index(std::vector{2, 2, 2, 2},
                      std::vector{0.25, 0.25, 0.25, 0.25}) ==
        doctest::Approx(2.0));
  CHECK(mixture_index(std::vector{3, 0, 1}, std::vector{1.0, 0.0, 0.0}) ==
        doctest::Approx(3.0));
  CHECK_THROWS_AS(mixture_index(std::vector{1, 2}, std::vector{1.0}),
                  std::invalid_argument);
}

TEST_CASE("compute_means: symmetry, pinned softmax and row sums") {
  // theta = 0, beta = 0 -> 1/K everywhere.
  std::vector<double> S{0.4, 1.2};
  Matrix x(2, 0);
  Matrix mu = compute_means(S, x, std::vector{0.0, 0.0, 0.0}, Matrix(3, 0));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(mu(i, k) == doctest::Approx(1.0 / 3).epsilon(1e-14));

  // K=3, theta = (0, 0, -0.9), S = 1, J = 0: scalar softmax of (0, 0, -0.9).
  Matrix x1(1, 0);
  mu = compute_means(std::vector{1.0}, x1, std::vector{0.0, 0.0, -0.9},
                     Matrix(3, 0));
  const double denom = 2.0 + std::exp(-0.9);
  CHECK(mu(0, 0) == doctest::Approx(1.0 / denom).epsilon(1e-12));
  CHECK(mu(0, 1) == doctest::Approx(1.0 / denom).epsilon(1e-12));
  CHECK(mu(0, 2) == doctest::Approx(std::exp(-0.9) / denom).epsilon(1e-12));

  // Random parameters: rows sum to one, and values match a shifted softmax
  // oracle (the shift is immaterial).
  Rng rng(8);
  const std::size_t n = 40, K = 4, J = 3;
  std::vector<double> Sr(n);
  Matrix xr(n, J);
  for (std::size_t i = 0; i < n; ++i) {
    Sr[i] = rng.uniform(0.0, 3.0);
    for (std::size_t j = 0; j < J; ++j) xr(i, j) = rng.normal();
  }
  std::vector<double> theta{0.0, 0.7, -50.0, 30.0};
  Matrix beta(K, J);
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t j = 0; j < J; ++j) beta(k, j) = rng.uniform(-2.0, 2.0);
  mu = compute_means(Sr, xr, theta, beta);
  const double shift = rng.uniform(-5.0, 5.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += mu(i, k);
    CHECK(std::abs(sum - 1.0) <= 1e-12);
    double denom_s = 0.0;
    std::vector<double> num(K);
    for (std::size_t k = 0; k < K; ++k) {
      double lin = Sr[i] * theta[k] + shift;
      for (std::size_t j = 0; j < J; ++j) lin += xr(i, j) * beta(k, j);
      num[k] = std::exp(lin - 40.0);  // any common offset
      denom_s += num[k];
    }
    for (std::size_t k = 0; k < K; ++k)
      CHECK(mu(i, k) == doctest::Approx(num[k] / denom_s).epsilon(1e-10));
  }
}

TEST_CASE("compute_means rejects non-finite linear predictors") {
  Matrix x1(1, 0);
  CHECK_THROWS_AS(
      compute_means(std::vector{1.0}, x1,
                    std::vector{0.0, std::numeric_limits<double>::infinity()},
                    Matrix(2, 0)),
      std::domain_error);
}

TEST_CASE("log posterior agrees with the independent product-form oracle") {
  Rng rng(301);
  const auto data = oracle::random_dataset(25, 3, 3, 2, rng);
  PriorConfig priors;
  const DbwqsModel model(data, priors);
  auto ws = model.make_workspace();
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = random_state(model.dims(), rng, 1.5);
    const double lib = model.log_posterior(v, ws);
    const double ora = oracle::log_posterior(v, data, priors);
    worst = std::max(worst,
                     std::abs(lib - ora) / std::max({1.0, std::abs(lib)}));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("zero-data posterior is the prior alone") {
  Rng rng(55);
  const auto data = oracle::random_dataset(0, 3, 3, 0, rng);
  PriorConfig priors;
  const DbwqsModel model(data, priors);
  const auto v = random_state(model.dims(), rng);
  CHECK(model.log_posterior(v) ==
        doctest::Approx(oracle::log_posterior(v, data, priors))
            .epsilon(1e-10));
}

TEST_CASE("duplicating every row doubles the likelihood part") {
  Rng rng(56);
  const auto data1 = oracle::random_dataset(12, 3, 3, 1, rng);
  // Duplicate rows.
  Matrix y2(24, 3), x2(24, 1);
  QuantileMatrix q2;
  q2.rows = 24;
  q2.cols = 3;
  q2.n_quantiles = 4;
  q2.scores.resize(24 * 3);
  for (std::size_t i = 0; i < 24; ++i) {
    const std::size_t src = i % 12;
    for (std::size_t k = 0; k < 3; ++k) y2(i, k) = data1.y(src, k);
    for (std::size_t m = 0; m < 3; ++m)
      q2.scores[i * 3 + m] = data1.q.at(src, m);
    x2(i, 0) = data1.x(src, 0);
  }
  const auto data2 = DbwqsData::create(std::move(y2), std::move(q2), std::move(x2));
  const auto data0 = oracle::random_dataset(0, 3, 3, 1, rng);

  PriorConfig priors;
  const DbwqsModel m1(data1, priors), m2(data2, priors), m0(data0, priors);
  const auto v = random_state(m1.dims(), rng);
  const double prior_part = m0.log_posterior(v);
  const double like1 = m1.log_posterior(v) - prior_part;
  const double like2 = m2.log_posterior(v) - prior_part;
  CHECK(like2 == doctest::Approx(2.0 * like1).epsilon(1e-10));
}

TEST_CASE("analytic gradient matches central finite differences") {
  Rng rng(77);
  const auto data = oracle::random_dataset(20, 3, 4, 2, rng);
  PriorConfig priors;
  const DbwqsModel model(data, priors);
  auto ws = model.make_workspace();
  std::vector<double> grad(model.dims().dim());

  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const auto v = random_state(model.dims(), rng);
    const double val = model.log_posterior_grad(v, grad, ws);
    REQUIRE(std::isfinite(val));
    const auto fd = oracle::finite_difference_gradient(
        [&](std::span<const double> q) { return model.log_posterior(q, ws); },
        v);
    for (std::size_t d = 0; d < grad.size(); ++d) {
      const double rel = std::abs(grad[d] - fd[d]) /
                         std::max({1.0, std::abs(grad[d]), std::abs(fd[d])});
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("prior-only gradients: theta mode and the log-phi Jacobian term") {
  Rng rng(78);
  const auto data = oracle::random_dataset(0, 3, 3, 2, rng);
  PriorConfig priors;
  const DbwqsModel model(data, priors);
  auto ws = model.make_workspace();
  const ModelDims& dims = model.dims();
  std::vector<double> v(dims.dim(), 0.0), grad(dims.dim());
  v[dims.logphi_offset()] = 0.4;
  model.log_posterior_grad(v, grad, ws);
  // theta = beta = 0 sits at the Normal prior mode.
  for (std::size_t k = 0; k < dims.K - 1; ++k)
    CHECK(grad[dims.theta_offset() + k] == doctest::Approx(0.0));
  // d/d(log phi) = phi * ((a-1)/phi - b) + 1.
  const double phi = std::exp(0.4);
  const double expect = (priors.a_phi - 1.0) - priors.b_phi * phi + 1.0;
  CHECK(grad[dims.logphi_offset()] == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("joint exposure permutation leaves the constrained posterior fixed") {
  Rng rng(91);
  const auto data = oracle::random_dataset(18, 3, 4, 0, rng);
  PriorConfig priors;
  const DbwqsModel model(data, priors);
  const auto v = random_state(model.dims(), rng);
  ParameterState s = constrain(v, model.dims()).state;
  const double base = model.log_posterior_constrained(s);

  const std::vector<std::size_t> perm{3, 1, 0, 2};
  QuantileMatrix qp = data.q;
  for (std::size_t i = 0; i < data.n(); ++i)
    for (std::size_t m = 0; m < 4; ++m)
      qp.scores[i * 4 + m] = data.q.at(i, perm[m]);
  Matrix y = data.y;
  const auto datap = DbwqsData::create(std::move(y), std::move(qp), data.x);
  const DbwqsModel modelp(datap, priors);

  ParameterState sp = s;
  for (std::size_t m = 0; m < 4; ++m) {
    sp.w[m] = s.w[perm[m]];
    sp.pi[m] = s.pi[perm[m]];
  }
  CHECK(modelp.log_posterior_constrained(sp) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("sigma_beta only moves the beta prior term") {
  Rng rng(92);
  const auto data = oracle::random_dataset(15, 3, 3, 2, rng);
  PriorConfig p1, p2;
  p2.sigma_beta = 1e6;
  const DbwqsModel m1(data, p1), m2(data, p2);
  const auto v = random_state(m1.dims(), rng);
  const auto state = constrain(v, m1.dims()).state;
  auto beta_prior = [&](double sigma) {
    double acc = 0.0;
    for (std::size_t k = 1; k < 3; ++k)
      for (std::size_t j = 0; j < 2; ++j)
        acc += -0.5 * std::log(2.0 * M_PI) - std::log(sigma) -
               state.beta(k, j) * state.beta(k, j) / (2.0 * sigma * sigma);
    return acc;
  };
  const double a = m1.log_posterior(v) - beta_prior(p1.sigma_beta);
  const double b = m2.log_posterior(v) - beta_prior(p2.sigma_beta);
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("scalar and AVX2 backends agree through the full model") {
  if (!kern::avx2_available()) return;
  Rng rng(93);
  const auto data = oracle::random_dataset(33, 4, 3, 2, rng);
  const DbwqsModel model(data, PriorConfig{});
  auto ws = model.make_workspace();
  std::vector<double> g1(model.dims().dim()), g2(model.dims().dim());

  const auto& before = kern::active();
  for (int trial = 0; trial < 10; ++trial) {
    const auto v = random_state(model.dims(), rng);
    kern::set_active(kern::scalar_backend());
    const double val1 = model.log_posterior_grad(v, g1, ws);
    kern::set_active(kern::avx2_backend());
    const double val2 = model.log_posterior_grad(v, g2, ws);
    CHECK(std::abs(val1 - val2) <= 1e-10 * std::max(1.0, std::abs(val1)));
    for (std::size_t d = 0; d < g1.size(); ++d)
      CHECK(std::abs(g1[d] - g2[d]) <=
            1e-9 * std::max({1.0, std::abs(g1[d])}));
  }
  kern::set_active(before);
}

TEST_CASE("invalid data and priors are rejected") {
  Matrix y(2, 3, 1.0 / 3);
  y(1, 0) = 0.5;  // row sums to 1.1666...
  QuantileMatrix q;
  q.rows = 2;
  q.cols = 1;
  q.n_quantiles = 4;
  q.scores = {0, 1};
  CHECK_THROWS(DbwqsData::create(std::move(y), std::move(q), Matrix()));

  PriorConfig p;
  p.a_phi = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("zero policy: replace renormalizes, reject leaves rows alone") {
  Matrix y(1, 3);
  y(0, 0) = 0.0;
  y(0, 1) = 0.4;
  y(0, 2) = 0.6;
  Matrix replaced = y;
  apply_zero_policy(replaced, ZeroPolicy::kReplace, 1e-6);
  CHECK(replaced(0, 0) > 0.0);
  double sum = replaced(0, 0) + replaced(0, 1) + replaced(0, 2);
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  Matrix rejected = y;
  apply_zero_policy(rejected, ZeroPolicy::kReject);
  CHECK(rejected(0, 0) == 0.0);
}
