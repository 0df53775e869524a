#pragma once

#include <string>
#include <vector>

namespace dbwqs {

// Draws for one scalar quantity, one vector per chain.
using ChainDraws = std::vector<std::vector<double>>;

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double cri95_lower = 0.0, cri95_upper = 0.0;
  double cri80_lower = 0.0, cri80_upper = 0.0;
  double ess = 0.0;
  double rhat = 0.0;
  bool degenerate = false;  // zero within-chain variance; rhat/ess are NaN
};

// Classic split R-hat: each chain halved, sqrt(((n-1)/n W + B/n) / W) over
// the half-chains.  Degenerate (zero within-chain variance) inputs yield NaN.
double split_rhat(const ChainDraws& chains);

// Rank-normalized variant: draws replaced by normal scores of their pooled
// ranks before the classic computation.
double split_rhat_rank_normalized(const ChainDraws& chains);

// Effective sample size total/(1 + 2 sum rho_t) with chain-averaged
// autocorrelations and Geyer initial-positive-sequence truncation; capped at
// 1.5x the total draw count.
double ess(const ChainDraws& chains);

// Biased (divide-by-N) autocorrelation estimates, lags 0..max_lag, lag 0 = 1.
std::vector<double> autocorrelation(const std::vector<double>& draws,
                                    int max_lag);

// Pooled mean/sd and equal-tailed credible bounds (linear-interpolation
// quantiles at 2.5/97.5 and 10/90 percent), plus ess and split R-hat.
ParameterSummary summarize(const ChainDraws& chains, const std::string& name);

// Inverse standard normal CDF (used by the rank-normalized R-hat).
double inverse_normal_cdf(double p);

}  // namespace dbwqs
