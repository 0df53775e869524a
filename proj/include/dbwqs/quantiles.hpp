#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dbwqs/matrix.hpp"

namespace dbwqs {

// Empirical quantile of a sorted sample at probability p, linearly
// interpolated between order statistics (the "type 7" convention).
double quantile_of_sorted(std::span<const double> sorted, double p);

// Per-exposure quantile cutoffs fitted on training data.  cutpoints[m] holds
// the n_quantiles-1 ascending cutoffs for exposure m; scoring maps a raw
// value to the number of cutoffs it reaches (ties take the higher bin), so
// scores always land in [0, n_quantiles-1].
struct QuantileScorer {
  int n_quantiles = 0;
  std::vector<std::string> exposure_names;
  std::vector<std::vector<double>> cutpoints;

  std::size_t n_exposures() const { return cutpoints.size(); }
};

struct QuantileMatrix {
  std::size_t rows = 0, cols = 0;
  int n_quantiles = 0;
  std::vector<int> scores;  // row-major

  int at(std::size_t i, std::size_t j) const { return scores[i * cols + j]; }
};

// Fits cutoffs at probabilities j/n_quantiles, j = 1..n_quantiles-1, per
// column.  Throws std::invalid_argument on non-finite input, N < n_quantiles,
// or a degenerate (constant) column.
QuantileScorer fit_quantile_scorer(const Matrix& exposures, int n_quantiles,
                                   std::vector<std::string> names = {});

// Applies a fitted scorer; column count must match.  Out-of-range values
// clamp to the trained score range by construction.
QuantileMatrix score(const QuantileScorer& scorer, const Matrix& exposures);

int score_value(const QuantileScorer& scorer, std::size_t exposure,
                double value);

}  // namespace dbwqs
