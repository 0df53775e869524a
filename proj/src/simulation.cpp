#include "dbwqs/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "dbwqs/diagnostics.hpp"
#include "dbwqs/dirichlet.hpp"
#include "dbwqs/errors.hpp"
#include "dbwqs/quantiles.hpp"

namespace dbwqs {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kSimQuantiles = 4;  // quartile scores in the generating model

// Work queue over (scenario, repetition) cells; seeds are a pure function of
// the cell, so scheduling cannot affect results.
void parallel_for(int n_tasks, int n_threads, const std::function<void(int)>& fn) {
  if (n_threads <= 0)
    n_threads = static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min(n_threads, n_tasks));
  if (n_threads == 1) {
    for (int t = 0; t < n_tasks; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int w = 0; w < n_threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int t = next.fetch_add(1); t < n_tasks; t = next.fetch_add(1))
          fn(t);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Per-repetition fit record for the tracked parameters.
struct RepRecord {
  bool ok = false;
  std::vector<double> estimate, sd, lower, upper, rhat, ess, truth;
};

// Parameters tracked in study metrics: theta_2..K, beta, w, phi (constrained
// order with the pi block skipped).
std::vector<std::string> tracked_names(const ModelDims& dims) {
  auto names = constrained_names(dims);
  std::vector<std::string> out;
  for (const auto& n : names)
    if (n.rfind("pi_", 0) != 0) out.push_back(n);
  return out;
}

std::vector<std::size_t> tracked_indices(const ModelDims& dims) {
  auto names = constrained_names(dims);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i].rfind("pi_", 0) != 0) idx.push_back(i);
  return idx;
}

std::vector<double> tracked_truth(const TrueParams& truth, double phi,
                                  const ModelDims& dims) {
  std::vector<double> out;
  for (std::size_t k = 1; k < dims.K; ++k) out.push_back(truth.theta[k]);
  for (std::size_t k = 1; k < dims.K; ++k)
    for (std::size_t j = 0; j < dims.J; ++j) out.push_back(truth.beta(k, j));
  out.insert(out.end(), truth.w.begin(), truth.w.end());
  out.push_back(phi);
  return out;
}

RepRecord fit_and_record(const DbwqsData& data, const TrueParams& truth,
                         const ScenarioSpec& spec, SamplerConfig sampler,
                         const PriorConfig& priors, std::uint64_t fit_seed) {
  RepRecord rec;
  sampler.seed = fit_seed;
  sampler.parallel_chains = false;
  PosteriorDraws draws = run_chains(data, priors, sampler);
  const auto idx = tracked_indices(draws.dims);
  rec.truth = tracked_truth(truth, spec.phi, draws.dims);
  for (std::size_t p : idx) {
    ChainDraws cd(draws.n_chains());
    for (std::size_t c = 0; c < draws.n_chains(); ++c)
      cd[c] = draws.chain_column(c, p);
    const ParameterSummary s = summarize(cd, draws.names[p]);
    rec.estimate.push_back(s.mean);
    rec.sd.push_back(s.sd);
    rec.lower.push_back(s.cri95_lower);
    rec.upper.push_back(s.cri95_upper);
    rec.rhat.push_back(s.rhat);
    rec.ess.push_back(s.ess);
  }
  rec.ok = true;
  return rec;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (n < 2 * kSimQuantiles)
    throw std::invalid_argument("scenario n too small for quartile fitting");
  if (K < 2) throw std::invalid_argument("scenario K must be >= 2");
  if (M < 1) throw std::invalid_argument("scenario M must be >= 1");
  if (J < 0) throw std::invalid_argument("scenario J must be >= 0");
  if (!(phi > 0.0)) throw std::invalid_argument("scenario phi must be > 0");
  if (!(rho >= 0.0 && rho < 1.0))
    throw std::invalid_argument("scenario rho must be in [0, 1)");
  if (reps < 1) throw std::invalid_argument("scenario reps must be >= 1");
}

TrueParams table_truth(int K, int M) {
  TrueParams t;
  switch (K) {
    // Two-category reduction (Beta collapse); used by the joint-vs-individual
    // comparison, where both approaches fit the same model.
    case 2: t.theta = {0.0, -0.9}; break;
    case 3: t.theta = {0.0, 0.0, -0.9}; break;
    case 6: t.theta = {0.0, 0.0, -0.9, -0.5, 0.8, 0.9}; break;
    case 9: t.theta = {0.0, 0.0, -0.5, -0.85, 0.8, 0.9, -0.2, 0.1, -0.3}; break;
    default:
      throw std::invalid_argument("no canonical theta for K=" +
                                  std::to_string(K));
  }
  switch (M) {
    case 3: t.w = {0.8, 0.0, 0.2}; break;
    case 6: t.w = {0.3, 0.1, 0.1, 0.1, 0.2, 0.2}; break;
    case 9: t.w = {0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0}; break;
    default:
      throw std::invalid_argument("no canonical w for M=" + std::to_string(M));
  }
  return t;
}

std::pair<DbwqsData, TrueParams> generate_dataset(const ScenarioSpec& spec,
                                                  const TrueParams& truth,
                                                  Rng& rng) {
  spec.validate();
  const std::size_t n = spec.n, K = spec.K, M = spec.M, J = spec.J;
  if (truth.theta.size() != K || truth.w.size() != M)
    throw std::invalid_argument("truth does not match scenario dimensions");

  TrueParams full = truth;
  Matrix x(n, J);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < J; ++j) x(i, j) = rng.normal();
  full.beta = Matrix(K, J);
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t j = 0; j < J; ++j) full.beta(k, j) = rng.uniform(-1.0, 1.0);

  // Equicorrelated exposures: (1-rho) I + rho 11' has square root
  // a I + b 11' with a = sqrt(1-rho), b = (sqrt(1-rho+M rho) - a) / M.
  const double a = std::sqrt(1.0 - spec.rho);
  const double b =
      (std::sqrt(1.0 - spec.rho + static_cast<double>(M) * spec.rho) - a) /
      static_cast<double>(M);
  Matrix z(n, M);
  std::vector<double> g(M);
  for (std::size_t i = 0; i < n; ++i) {
    double gsum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      g[m] = rng.normal();
      gsum += g[m];
    }
    for (std::size_t m = 0; m < M; ++m) z(i, m) = a * g[m] + b * gsum;
  }
  const QuantileScorer scorer = fit_quantile_scorer(z, kSimQuantiles);
  QuantileMatrix q = score(scorer, z);

  std::vector<double> S(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t m = 0; m < M; ++m) s += q.at(i, m) * full.w[m];
    S[i] = s;
  }
  const Matrix mu = compute_means(S, x, full.theta, full.beta);

  Matrix y(n, K);
  std::vector<double> alpha(K);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < K; ++k) alpha[k] = spec.phi * mu(i, k);
    const std::vector<double> row = sample_dirichlet(alpha, rng);
    for (std::size_t k = 0; k < K; ++k) y(i, k) = row[k];
  }
  return {DbwqsData::create(std::move(y), std::move(q), std::move(x)),
          std::move(full)};
}

MetricsRow aggregate_metrics(const std::string& parameter,
                             std::span<const double> estimates,
                             std::span<const double> sds,
                             std::span<const double> lower,
                             std::span<const double> upper,
                             std::span<const double> truth) {
  const std::size_t r = estimates.size();
  if (r == 0 || sds.size() != r || lower.size() != r || upper.size() != r ||
      truth.size() != r)
    throw std::invalid_argument("metric inputs must share a nonzero length");
  MetricsRow row;
  row.parameter = parameter;
  row.n_reps_used = static_cast<int>(r);
  double terr = 0.0, terr2 = 0.0, tabs = 0.0, tsd = 0.0, tt = 0.0, test = 0.0;
  double covered = 0.0;
  bool coverage_defined = true;
  for (std::size_t i = 0; i < r; ++i) {
    const double err = estimates[i] - truth[i];
    terr += err;
    terr2 += err * err;
    tabs += std::abs(err);
    tsd += sds[i];
    tt += truth[i];
    test += estimates[i];
    if (std::isnan(lower[i]) || std::isnan(upper[i]))
      coverage_defined = false;
    else if (lower[i] <= truth[i] && truth[i] <= upper[i])
      covered += 1.0;
  }
  const double rn = static_cast<double>(r);
  row.truth = tt / rn;
  row.mc_mean = test / rn;
  row.bias = terr / rn;
  row.rmse = std::sqrt(terr2 / rn);
  row.mae = tabs / rn;
  row.mean_sd = tsd / rn;
  row.coverage95 = coverage_defined ? covered / rn : kNaN;
  return row;
}

StudyMetrics run_study(std::span<const ScenarioSpec> grid,
                       const SamplerConfig& sampler, const PriorConfig& priors,
                       int n_threads) {
  if (grid.empty()) throw std::invalid_argument("empty scenario grid");
  for (const auto& s : grid) s.validate();

  struct Cell {
    int scenario;
    int rep;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < grid.size(); ++s)
    for (int r = 0; r < grid[s].reps; ++r)
      cells.push_back({static_cast<int>(s), r});

  std::vector<std::vector<RepRecord>> records(grid.size());
  for (std::size_t s = 0; s < grid.size(); ++s)
    records[s].resize(grid[s].reps);

  parallel_for(static_cast<int>(cells.size()), n_threads, [&](int t) {
    const auto [s, r] = cells[t];
    const ScenarioSpec& spec = grid[s];
    Rng data_rng = Rng::stream(spec.seed, 2 * static_cast<std::uint64_t>(r));
    const TrueParams base = table_truth(spec.K, spec.M);
    auto [data, truth] = generate_dataset(spec, base, data_rng);
    const std::uint64_t fit_seed =
        splitmix64(splitmix64(spec.seed) ^ (2 * static_cast<std::uint64_t>(r) + 1));
    try {
      records[s][r] =
          fit_and_record(data, truth, spec, sampler, priors, fit_seed);
    } catch (const InferenceError&) {
      records[s][r].ok = false;  // excluded and counted below
    }
  });

  StudyMetrics out;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    ScenarioMetrics sm;
    sm.spec = grid[s];
    ModelDims dims{static_cast<std::size_t>(grid[s].n),
                   static_cast<std::size_t>(grid[s].K),
                   static_cast<std::size_t>(grid[s].M),
                   static_cast<std::size_t>(grid[s].J)};
    const auto names = tracked_names(dims);
    int failed = 0;
    std::vector<const RepRecord*> used;
    for (const auto& rec : records[s]) {
      if (rec.ok)
        used.push_back(&rec);
      else
        ++failed;
    }
    if (used.empty())
      throw InferenceError("all repetitions failed for a scenario");
    for (std::size_t p = 0; p < names.size(); ++p) {
      std::vector<double> est, sd, lo, hi, tr, rhat, essv;
      for (const auto* rec : used) {
        est.push_back(rec->estimate[p]);
        sd.push_back(rec->sd[p]);
        lo.push_back(rec->lower[p]);
        hi.push_back(rec->upper[p]);
        tr.push_back(rec->truth[p]);
        rhat.push_back(rec->rhat[p]);
        essv.push_back(rec->ess[p]);
      }
      MetricsRow row = aggregate_metrics(names[p], est, sd, lo, hi, tr);
      row.n_failed = failed;
      row.max_rhat = *std::max_element(rhat.begin(), rhat.end());
      row.min_ess = *std::min_element(essv.begin(), essv.end());
      sm.rows.push_back(std::move(row));
    }
    out.scenarios.push_back(std::move(sm));
  }
  return out;
}

DbwqsData individual_outcome_data(const DbwqsData& data, std::size_t category) {
  const std::size_t n = data.n();
  if (category >= data.n_categories())
    throw std::invalid_argument("category out of range");
  Matrix y2(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = data.y(i, category);
    y2(i, 0) = 1.0 - p;  // complement is the reference
    y2(i, 1) = p;
  }
  return DbwqsData::create(std::move(y2), data.q, data.x);
}

std::vector<PosteriorDraws> fit_individual_outcomes(const DbwqsData& data,
                                                    const SamplerConfig& sampler,
                                                    const PriorConfig& priors) {
  std::vector<PosteriorDraws> fits;
  fits.reserve(data.n_categories());
  for (std::size_t k = 0; k < data.n_categories(); ++k)
    fits.push_back(run_chains(individual_outcome_data(data, k), priors, sampler));
  return fits;
}

CompareResult compare_joint_individual(const ScenarioSpec& spec,
                                       const SamplerConfig& sampler,
                                       const PriorConfig& priors,
                                       int n_threads) {
  spec.validate();
  const std::size_t K = spec.K;

  struct RepCompare {
    bool ok = false;
    // Per non-reference category: estimate and 95% bounds.
    std::vector<double> joint_est, joint_lo, joint_hi;
    std::vector<double> ind_est, ind_lo, ind_hi;
  };
  std::vector<RepCompare> reps(spec.reps);

  parallel_for(spec.reps, n_threads, [&](int r) {
    Rng data_rng = Rng::stream(spec.seed, 2 * static_cast<std::uint64_t>(r));
    const TrueParams base = table_truth(spec.K, spec.M);
    auto [data, truth] = generate_dataset(spec, base, data_rng);
    (void)truth;
    const std::uint64_t fit_seed =
        splitmix64(splitmix64(spec.seed) ^ (2 * static_cast<std::uint64_t>(r) + 1));

    SamplerConfig cfg = sampler;
    cfg.parallel_chains = false;

    auto theta_summary = [](const PosteriorDraws& draws, std::size_t param) {
      ChainDraws cd(draws.n_chains());
      for (std::size_t c = 0; c < draws.n_chains(); ++c)
        cd[c] = draws.chain_column(c, param);
      return summarize(cd, "theta");
    };

    RepCompare rc;
    try {
      cfg.seed = fit_seed;
      const PosteriorDraws joint = run_chains(data, priors, cfg);
      for (std::size_t k = 1; k < K; ++k) {
        const ParameterSummary s = theta_summary(joint, k - 1);
        rc.joint_est.push_back(s.mean);
        rc.joint_lo.push_back(s.cri95_lower);
        rc.joint_hi.push_back(s.cri95_upper);
      }
      for (std::size_t k = 1; k < K; ++k) {
        cfg.seed = splitmix64(fit_seed ^ (k + 1));
        const PosteriorDraws ind =
            run_chains(individual_outcome_data(data, k), priors, cfg);
        // K = 2 fit: theta_2 is constrained column 0.
        const ParameterSummary s = theta_summary(ind, 0);
        rc.ind_est.push_back(s.mean);
        rc.ind_lo.push_back(s.cri95_lower);
        rc.ind_hi.push_back(s.cri95_upper);
      }
      rc.ok = true;
    } catch (const InferenceError&) {
      rc.ok = false;
    }
    reps[r] = std::move(rc);
  });

  const TrueParams base = table_truth(spec.K, spec.M);
  CompareResult out;
  out.spec = spec;
  for (std::size_t k = 1; k < K; ++k) {
    std::vector<double> je, jl, jh, ie, il, ih, tr;
    for (const auto& rc : reps) {
      if (!rc.ok) continue;
      je.push_back(rc.joint_est[k - 1]);
      jl.push_back(rc.joint_lo[k - 1]);
      jh.push_back(rc.joint_hi[k - 1]);
      ie.push_back(rc.ind_est[k - 1]);
      il.push_back(rc.ind_lo[k - 1]);
      ih.push_back(rc.ind_hi[k - 1]);
      tr.push_back(base.theta[k]);
    }
    if (je.empty()) throw InferenceError("all comparison repetitions failed");
    std::vector<double> dummy_sd(je.size(), 0.0);
    const MetricsRow jm = aggregate_metrics("joint", je, dummy_sd, jl, jh, tr);
    const MetricsRow im = aggregate_metrics("ind", ie, dummy_sd, il, ih, tr);
    CompareRow row;
    row.category = static_cast<int>(k + 1);
    row.truth = base.theta[k];
    row.joint_bias = jm.bias;
    row.joint_rmse = jm.rmse;
    row.joint_coverage95 = jm.coverage95;
    row.individual_bias = im.bias;
    row.individual_rmse = im.rmse;
    row.individual_coverage95 = im.coverage95;
    row.n_reps_used = jm.n_reps_used;
    out.rows.push_back(row);
  }
  for (const auto& rc : reps)
    if (!rc.ok) ++out.n_failed;
  return out;
}

}  // namespace dbwqs
