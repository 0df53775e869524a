#include <doctest.h>

#include <cmath>
#include <vector>

#include "dbwqs/effects.hpp"
#include "dbwqs/rng.hpp"
#include "dbwqs/simulation.hpp"
#include "oracles.hpp"

using namespace dbwqs;

namespace {

// Assembles a PosteriorDraws holding explicitly chosen constrained states.
PosteriorDraws synthetic_draws(const ModelDims& dims,
                               const std::vector<ParameterState>& states,
                               std::size_t n_chains = 1) {
  PosteriorDraws out;
  out.dims = dims;
  out.names = constrained_names(dims);
  out.chains.resize(n_chains);
  out.constrained.resize(n_chains);
  for (std::size_t c = 0; c < n_chains; ++c) {
    Matrix m(states.size(), constrained_size(dims));
    for (std::size_t i = 0; i < states.size(); ++i) {
      const auto flat = flatten_constrained(states[i]);
      std::copy(flat.begin(), flat.end(), m.row(i).begin());
    }
    out.constrained[c] = std::move(m);
  }
  return out;
}

ParameterState make_state(std::vector<double> theta, std::vector<double> w,
                          double phi = 5.0, std::size_t J = 0) {
  ParameterState s;
  const std::size_t K = theta.size();
  s.theta = std::move(theta);
  s.beta = Matrix(K, J);
  s.w = std::move(w);
  s.pi.assign(s.w.size(), 1.0);
  s.phi = phi;
  return s;
}

// One-subject dataset with S = 1 (single exposure, weight 1, score 1).
DbwqsData unit_index_data(std::size_t K) {
  Matrix y(1, K, 1.0 / static_cast<double>(K));
  QuantileMatrix q;
  q.rows = 1;
  q.cols = 1;
  q.n_quantiles = 4;
  q.scores = {1};
  return DbwqsData::create(std::move(y), std::move(q), Matrix());
}

}  // namespace

TEST_CASE("b_ref: all-zero theta gives exactly one") {
  Rng rng(1);
  const auto data = oracle::random_dataset(15, 3, 2, 1, rng);
  ParameterState s = make_state({0.0, 0.0, 0.0}, {0.6, 0.4}, 5.0, 1);
  for (const double b : b_ref_per_subject(s, data)) CHECK(b == 1.0);
}

TEST_CASE("b_ref: positive theta_2 shrinks the reference at K=2") {
  Rng rng(2);
  const auto data = oracle::random_dataset(20, 2, 2, 0, rng);
  ParameterState s = make_state({0.0, 0.8}, {0.5, 0.5});
  for (const double b : b_ref_per_subject(s, data)) {
    CHECK(b > 0.0);
    CHECK(b < 1.0);
  }
}

TEST_CASE("b_ref: hand-computed K=3 case at S=1") {
  const auto data = unit_index_data(3);
  ParameterState s = make_state({0.0, 0.5, -0.5}, {1.0});
  const auto b = b_ref_per_subject(s, data);
  REQUIRE(b.size() == 1);
  const double expect = (1.0 + std::exp(0.5) + std::exp(-0.5)) /
                        (1.0 + std::exp(1.0) + std::exp(-1.0));
  CHECK(b[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("b_ref matches the raw-exponential formula on moderate states") {
  Rng rng(3);
  const auto data = oracle::random_dataset(10, 4, 3, 2, rng);
  ParameterState s = make_state({0.0, 0.4, -0.2, 0.9}, {0.2, 0.5, 0.3}, 5.0, 2);
  for (std::size_t k = 1; k < 4; ++k)
    for (std::size_t j = 0; j < 2; ++j)
      s.beta(k, j) = rng.uniform(-1.0, 1.0);
  const auto lib = b_ref_per_subject(s, data);
  for (std::size_t i = 0; i < data.n(); ++i) {
    double si = 0.0;
    for (std::size_t m = 0; m < 3; ++m) si += data.q.at(i, m) * s.w[m];
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      double lin = si * s.theta[k];
      for (std::size_t j = 0; j < 2; ++j) lin += data.x(i, j) * s.beta(k, j);
      num += std::exp(lin);
      den += std::exp(lin + s.theta[k]);
    }
    CHECK(lib[i] == doctest::Approx(num / den).epsilon(1e-12));
  }
}

TEST_CASE("b_ref survives extreme linear predictors") {
  const auto data = unit_index_data(3);
  ParameterState s = make_state({0.0, 400.0, -300.0}, {1.0});
  const auto b = b_ref_per_subject(s, data);
  CHECK(std::isfinite(b[0]));
  CHECK(b[0] > 0.0);
}

TEST_CASE("absolute change: zero theta means exactly 0% with no width") {
  Rng rng(4);
  const auto data = oracle::random_dataset(12, 3, 2, 0, rng);
  ModelDims dims{12, 3, 2, 0};
  std::vector<ParameterState> states(
      20, make_state({0.0, 0.0, 0.0}, {0.5, 0.5}));
  const auto draws = synthetic_draws(dims, states, 2);
  const EffectTable table = absolute_change(draws, data);
  REQUIRE(table.absolute_pct.size() == 3);
  for (const auto& s : table.absolute_pct) {
    CHECK(s.mean == 0.0);
    CHECK(s.cri95_lower == 0.0);
    CHECK(s.cri95_upper == 0.0);
  }
  for (const auto& s : table.relative_theta) CHECK(s.mean == 0.0);
}

TEST_CASE("draw-wise ratio identity and reference column") {
  Rng rng(5);
  const auto data = oracle::random_dataset(8, 3, 2, 0, rng);
  ModelDims dims{8, 3, 2, 0};
  std::vector<ParameterState> states;
  for (int i = 0; i < 30; ++i)
    states.push_back(make_state(
        {0.0, rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)},
        {0.3, 0.7}, std::exp(rng.uniform(0.0, 2.0))));
  const auto draws = synthetic_draws(dims, states);
  const EffectTable table = absolute_change(draws, data);
  const Matrix& ratios = table.ratio_draws[0];
  for (std::size_t it = 0; it < ratios.rows(); ++it) {
    const auto bref = b_ref_per_subject(states[it], data);
    double avg = 0.0;
    for (double b : bref) avg += b;
    avg /= static_cast<double>(bref.size());
    // Reference ratio equals the averaged b_ref, draw by draw.
    CHECK(ratios(it, 0) == avg);
    for (std::size_t k = 1; k < 3; ++k) {
      const double lhs = ratios(it, k) / ratios(it, 0);
      CHECK(std::abs(lhs - std::exp(states[it].theta[k])) < 1e-12);
    }
  }
}

TEST_CASE("single-draw absolute table matches direct arithmetic") {
  const auto data = unit_index_data(3);
  ModelDims dims{1, 3, 1, 0};
  const auto state = make_state({0.0, 0.5, -0.5}, {1.0});
  const auto draws = synthetic_draws(dims, {state});
  const EffectTable table = absolute_change(draws, data);
  const double bref = (1.0 + std::exp(0.5) + std::exp(-0.5)) /
                      (1.0 + std::exp(1.0) + std::exp(-1.0));
  CHECK(table.absolute_pct[0].mean ==
        doctest::Approx((bref - 1.0) * 100.0).epsilon(1e-12));
  CHECK(table.absolute_pct[1].mean ==
        doctest::Approx((std::exp(0.5) * bref - 1.0) * 100.0).epsilon(1e-12));
  CHECK(table.absolute_pct[2].mean ==
        doctest::Approx((std::exp(-0.5) * bref - 1.0) * 100.0).epsilon(1e-12));
}

TEST_CASE("relative change summarizes theta draws symmetrically") {
  Rng rng(6);
  const std::size_t n_draws = 400;
  ModelDims dims{5, 3, 2, 0};
  std::vector<ParameterState> states;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double a = 0.7 * (i < n_draws / 2 ? 1.0 : -1.0);
    states.push_back(make_state({0.0, a, 0.0}, {0.5, 0.5}));
  }
  const auto draws = synthetic_draws(dims, states);
  const EffectTable table = relative_change(draws);
  REQUIRE(table.relative_theta.size() == 2);
  CHECK(table.relative_theta[0].mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(table.relative_theta[0].cri95_lower ==
        doctest::Approx(-0.7).epsilon(1e-9));
  CHECK(table.relative_theta[0].cri95_upper ==
        doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("effect identities hold on a real fitted posterior") {
  Rng data_rng(612);
  ScenarioSpec spec;
  spec.n = 80;
  auto [data, truth] = generate_dataset(spec, table_truth(3, 3), data_rng);
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iter = 500;
  cfg.n_warmup = 200;
  cfg.seed = 2;
  const PosteriorDraws draws = run_chains(data, PriorConfig{}, cfg);
  const EffectTable table = absolute_change(draws, data);

  // exp(mean relative effect) * mean b_ref approximates the mean absolute
  // ratio (they differ only through draw correlations).
  for (std::size_t k = 1; k < 3; ++k) {
    double mean_ratio_k = 0.0, mean_ref = 0.0, mean_theta = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < draws.n_chains(); ++c) {
      const Matrix& r = table.ratio_draws[c];
      const auto theta = draws.chain_column(c, k - 1);
      for (std::size_t it = 0; it < r.rows(); ++it) {
        mean_ratio_k += r(it, k);
        mean_ref += r(it, 0);
        mean_theta += theta[it];
        ++count;
      }
    }
    mean_ratio_k /= count;
    mean_ref /= count;
    mean_theta /= count;
    CHECK(std::exp(mean_theta) * mean_ref ==
          doctest::Approx(mean_ratio_k).epsilon(0.05));
  }
}
