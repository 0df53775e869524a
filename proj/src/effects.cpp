#include "dbwqs/effects.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dbwqs {

namespace {

std::vector<std::string> default_names(std::size_t K,
                                       std::vector<std::string> names) {
  if (names.empty()) {
    for (std::size_t k = 1; k <= K; ++k)
      names.push_back("category_" + std::to_string(k));
  }
  if (names.size() != K)
    throw std::invalid_argument("category name count does not match K");
  return names;
}

double log_sum_exp(std::span<const double> x) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  double acc = 0.0;
  for (double v : x) acc += std::exp(v - m);
  return m + std::log(acc);
}

}  // namespace

std::vector<double> b_ref_per_subject(const ParameterState& draw,
                                      const DbwqsData& data) {
  const std::size_t n = data.n();
  const std::size_t K = data.n_categories();
  const std::size_t M = data.n_exposures();
  const std::size_t J = data.n_covariates();
  if (draw.theta.size() != K || draw.w.size() != M)
    throw std::invalid_argument("draw does not match data shapes");
  if (draw.theta[0] != 0.0)
    throw std::invalid_argument("reference theta must be 0");

  std::vector<double> out(n);
  std::vector<double> eta(K), eta_shift(K);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t m = 0; m < M; ++m) s += data.q.at(i, m) * draw.w[m];
    for (std::size_t k = 0; k < K; ++k) {
      double lin = s * draw.theta[k];
      for (std::size_t j = 0; j < J; ++j)
        lin += data.x(i, j) * draw.beta(k, j);
      if (!std::isfinite(lin))
        throw std::domain_error("non-finite linear predictor");
      eta[k] = lin;
      eta_shift[k] = lin + draw.theta[k];  // index moved by one unit
    }
    out[i] = std::exp(log_sum_exp(eta) - log_sum_exp(eta_shift));
  }
  return out;
}

EffectTable absolute_change(const PosteriorDraws& draws, const DbwqsData& data,
                            std::vector<std::string> category_names) {
  const std::size_t K = draws.dims.K;
  if (draws.n_kept() == 0) throw std::invalid_argument("no posterior draws");
  EffectTable table;
  table.category_names = default_names(K, std::move(category_names));

  // Percent-change draws per chain, per category, for the summaries.
  std::vector<ChainDraws> pct(K, ChainDraws(draws.n_chains()));
  table.ratio_draws.resize(draws.n_chains());
  for (std::size_t c = 0; c < draws.n_chains(); ++c) {
    const std::size_t kept = draws.constrained[c].rows();
    Matrix ratios(kept, K);
    for (std::size_t k = 0; k < K; ++k) pct[k][c].resize(kept);
    for (std::size_t it = 0; it < kept; ++it) {
      const ParameterState state = draws.state_at(c, it);
      const std::vector<double> bref = b_ref_per_subject(state, data);
      double avg = 0.0;
      for (double v : bref) avg += v;
      avg /= static_cast<double>(bref.size());
      ratios(it, 0) = avg;
      for (std::size_t k = 1; k < K; ++k)
        ratios(it, k) = std::exp(state.theta[k]) * avg;
      for (std::size_t k = 0; k < K; ++k)
        pct[k][c][it] = (ratios(it, k) - 1.0) * 100.0;
    }
    table.ratio_draws[c] = std::move(ratios);
  }

  table.absolute_pct.reserve(K);
  for (std::size_t k = 0; k < K; ++k)
    table.absolute_pct.push_back(summarize(pct[k], table.category_names[k]));

  EffectTable rel = relative_change(draws, table.category_names);
  table.relative_theta = std::move(rel.relative_theta);
  return table;
}

EffectTable relative_change(const PosteriorDraws& draws,
                            std::vector<std::string> category_names) {
  const std::size_t K = draws.dims.K;
  if (draws.n_kept() == 0) throw std::invalid_argument("no posterior draws");
  EffectTable table;
  table.category_names = default_names(K, std::move(category_names));
  table.relative_theta.reserve(K - 1);
  // theta_k occupies constrained column k-1 for k = 2..K (1-based categories).
  for (std::size_t k = 1; k < K; ++k) {
    ChainDraws cd(draws.n_chains());
    for (std::size_t c = 0; c < draws.n_chains(); ++c)
      cd[c] = draws.chain_column(c, k - 1);
    table.relative_theta.push_back(summarize(cd, table.category_names[k]));
  }
  return table;
}

}  // namespace dbwqs
