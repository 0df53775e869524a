#include "dbwqs/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dbwqs/kernels.hpp"
#include "dbwqs/quantiles.hpp"

namespace dbwqs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(const std::vector<double>& x) {
  return kern::sum(x) / static_cast<double>(x.size());
}

double sample_variance(const std::vector<double>& x, double mean) {
  double acc = 0.0;
  for (double v : x) acc += (v - mean) * (v - mean);
  return acc / static_cast<double>(x.size() - 1);
}

// Split every chain into halves of equal length (middle draw dropped when
// odd).
ChainDraws split_halves(const ChainDraws& chains) {
  ChainDraws halves;
  halves.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    halves.emplace_back(c.begin(), c.begin() + h);
    halves.emplace_back(c.end() - h, c.end());
  }
  return halves;
}

double rhat_of_halves(const ChainDraws& halves) {
  const std::size_t m = halves.size();
  const std::size_t n = halves[0].size();
  if (n < 2) return kNaN;

  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean_of(halves[j]);
    w += sample_variance(halves[j], means[j]);
  }
  w /= static_cast<double>(m);
  if (!(w > 0.0)) return kNaN;

  const double grand = kern::sum(means) / static_cast<double>(m);
  double b_over_n = 0.0;
  if (m > 1) {
    for (double mu : means) b_over_n += (mu - grand) * (mu - grand);
    b_over_n /= static_cast<double>(m - 1);
  }
  const double nn = static_cast<double>(n);
  const double var_plus = (nn - 1.0) / nn * w + b_over_n;
  return std::sqrt(var_plus / w);
}

// Autocovariance at a single lag (biased, divide by N).
double autocov(const std::vector<double>& x, double mean, std::size_t lag) {
  const std::size_t n = x.size();
  if (lag >= n) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < n; ++i)
    acc += (x[i] - mean) * (x[i + lag] - mean);
  return acc / static_cast<double>(n);
}

}  // namespace

double split_rhat(const ChainDraws& chains) {
  if (chains.empty()) throw std::invalid_argument("no chains");
  for (const auto& c : chains)
    if (c.size() < 4)
      throw std::invalid_argument("split R-hat needs >= 4 draws per chain");
  return rhat_of_halves(split_halves(chains));
}

double inverse_normal_cdf(double p) {
  // Acklam's rational approximation, refined with one Halley step.
  if (!(p > 0.0 && p < 1.0)) return kNaN;
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double split_rhat_rank_normalized(const ChainDraws& chains) {
  if (chains.empty()) throw std::invalid_argument("no chains");
  std::size_t total = 0;
  for (const auto& c : chains) {
    if (c.size() < 4)
      throw std::invalid_argument("split R-hat needs >= 4 draws per chain");
    total += c.size();
  }
  // Pool, rank (average ties), transform to normal scores.
  std::vector<std::pair<double, std::size_t>> pooled;
  pooled.reserve(total);
  std::size_t idx = 0;
  for (const auto& c : chains)
    for (double v : c) pooled.emplace_back(v, idx++);
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> rank(total);
  std::size_t i = 0;
  while (i < total) {
    std::size_t j = i;
    while (j + 1 < total && pooled[j + 1].first == pooled[i].first) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[pooled[t].second] = avg;
    i = j + 1;
  }
  ChainDraws z(chains.size());
  idx = 0;
  const double denom = static_cast<double>(total) + 0.25;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    z[c].resize(chains[c].size());
    for (std::size_t t = 0; t < chains[c].size(); ++t)
      z[c][t] = inverse_normal_cdf((rank[idx++] - 0.375) / denom);
  }
  return rhat_of_halves(split_halves(z));
}

double ess(const ChainDraws& chains) {
  if (chains.empty()) throw std::invalid_argument("no chains");
  std::size_t total = 0;
  std::size_t min_len = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) {
    total += c.size();
    min_len = std::min(min_len, c.size());
  }
  if (min_len < 2) return kNaN;

  std::vector<double> means(chains.size());
  double c0 = 0.0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    means[c] = mean_of(chains[c]);
    c0 += autocov(chains[c], means[c], 0);
  }
  c0 /= static_cast<double>(chains.size());
  if (!(c0 > 0.0)) return kNaN;

  // Geyer initial positive sequence over chain-averaged correlations.
  const std::size_t max_lag = min_len - 1;
  auto rho_at = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < chains.size(); ++c)
      acc += autocov(chains[c], means[c], t);
    return acc / (static_cast<double>(chains.size()) * c0);
  };
  double sum_gamma = 0.0;
  std::size_t lag = 0;
  while (lag <= max_lag) {
    const double r0 = rho_at(lag);
    const double r1 = lag + 1 <= max_lag ? rho_at(lag + 1) : 0.0;
    const double gamma = r0 + r1;
    if (gamma <= 0.0) break;
    sum_gamma += gamma;
    lag += 2;
  }
  // tau = 1 + 2 sum_{t>=1} rho_t, folded from the paired sums (rho_0 = 1).
  const double tau = 2.0 * sum_gamma - 1.0;
  const double n_total = static_cast<double>(total);
  const double cap = 1.5 * n_total;
  if (!(tau > 0.0)) return cap;
  return std::min(n_total / tau, cap);
}

std::vector<double> autocorrelation(const std::vector<double>& draws,
                                    int max_lag) {
  if (draws.size() < 2)
    throw std::invalid_argument("autocorrelation needs >= 2 draws");
  if (max_lag < 0) throw std::invalid_argument("max_lag must be >= 0");
  const double mean = mean_of(draws);
  const double c0 = autocov(draws, mean, 0);
  std::vector<double> rho(static_cast<std::size_t>(max_lag) + 1);
  rho[0] = 1.0;
  if (!(c0 > 0.0)) {
    std::fill(rho.begin() + 1, rho.end(), kNaN);
    return rho;
  }
  for (int t = 1; t <= max_lag; ++t)
    rho[t] = autocov(draws, mean, static_cast<std::size_t>(t)) / c0;
  return rho;
}

ParameterSummary summarize(const ChainDraws& chains, const std::string& name) {
  if (chains.empty()) throw std::invalid_argument("no chains");
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.empty()) throw std::invalid_argument("no draws");

  ParameterSummary s;
  s.name = name;
  s.mean = mean_of(pooled);
  s.sd = pooled.size() > 1 ? std::sqrt(sample_variance(pooled, s.mean)) : 0.0;

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  s.cri95_lower = quantile_of_sorted(sorted, 0.025);
  s.cri95_upper = quantile_of_sorted(sorted, 0.975);
  s.cri80_lower = quantile_of_sorted(sorted, 0.10);
  s.cri80_upper = quantile_of_sorted(sorted, 0.90);

  // Split R-hat needs at least two chains to be meaningful in reports; a
  // single chain comes back as unavailable (NaN) without a warning.
  bool rhat_warning = false;
  if (chains.size() >= 2 && chains[0].size() >= 4) {
    s.rhat = split_rhat(chains);
    rhat_warning = std::isnan(s.rhat);
  } else {
    s.rhat = kNaN;
  }
  s.ess = ess(chains);
  s.degenerate = rhat_warning || std::isnan(s.ess);
  return s;
}

}  // namespace dbwqs
