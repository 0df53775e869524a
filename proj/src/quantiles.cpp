#include "dbwqs/quantiles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dbwqs {

double quantile_of_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

QuantileScorer fit_quantile_scorer(const Matrix& exposures, int n_quantiles,
                                   std::vector<std::string> names) {
  if (n_quantiles < 2) throw std::invalid_argument("n_quantiles must be >= 2");
  const std::size_t n = exposures.rows();
  const std::size_t m = exposures.cols();
  if (n < static_cast<std::size_t>(n_quantiles))
    throw std::invalid_argument("need at least n_quantiles rows to fit");

  QuantileScorer scorer;
  scorer.n_quantiles = n_quantiles;
  scorer.exposure_names = std::move(names);
  scorer.cutpoints.resize(m);

  std::vector<double> col(n);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = exposures(i, j);
      if (!std::isfinite(v))
        throw std::invalid_argument("non-finite value in exposure column " +
                                    std::to_string(j));
      col[i] = v;
    }
    std::sort(col.begin(), col.end());
    if (col.front() == col.back())
      throw std::invalid_argument("degenerate exposure column " +
                                  std::to_string(j) +
                                  " (all values identical)");
    auto& cuts = scorer.cutpoints[j];
    cuts.resize(n_quantiles - 1);
    for (int q = 1; q < n_quantiles; ++q) {
      cuts[q - 1] =
          quantile_of_sorted(col, static_cast<double>(q) / n_quantiles);
    }
  }
  return scorer;
}

int score_value(const QuantileScorer& scorer, std::size_t exposure,
                double value) {
  const auto& cuts = scorer.cutpoints[exposure];
  // Number of cutoffs <= value; a value equal to a cutoff takes the higher bin.
  return static_cast<int>(
      std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

QuantileMatrix score(const QuantileScorer& scorer, const Matrix& exposures) {
  if (exposures.cols() != scorer.n_exposures())
    throw std::invalid_argument("exposure column count does not match scorer");
  QuantileMatrix out;
  out.rows = exposures.rows();
  out.cols = exposures.cols();
  out.n_quantiles = scorer.n_quantiles;
  out.scores.resize(out.rows * out.cols);
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j)
      out.scores[i * out.cols + j] = score_value(scorer, j, exposures(i, j));
  return out;
}

}  // namespace dbwqs
