#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbwqs/model.hpp"
#include "dbwqs/rng.hpp"
#include "dbwqs/sampler.hpp"

namespace dbwqs {

// One simulation scenario: sample size, outcome categories, exposures,
// covariates, global precision, pairwise exposure correlation, repetitions.
struct ScenarioSpec {
  int n = 150;
  int K = 3;
  int M = 3;
  int J = 0;
  double phi = 5.0;
  double rho = 0.3;
  int reps = 100;
  std::uint64_t seed = 1;

  void validate() const;
};

// Fixed generating coefficients; beta is drawn fresh per repetition.
struct TrueParams {
  std::vector<double> theta;  // length K, theta[0] = 0
  std::vector<double> w;      // length M, sums to 1
  Matrix beta;                // K x J, row 0 zero (empty until drawn)
};

// Canonical true coefficient/weight sets for K, M in {3, 6, 9}.
TrueParams table_truth(int K, int M);

// Runs the seven-step generating model: standard-normal covariates, beta
// rows uniform(-1,1), equicorrelated unit-variance normal exposures (pairwise
// covariance rho) via the closed-form matrix square root, quartile scores,
// the weighted index, the multinomial-logit means, alpha = phi * mu, and a
// Dirichlet outcome draw per subject.  Returns the data plus the truth record
// with the drawn beta filled in.
std::pair<DbwqsData, TrueParams> generate_dataset(const ScenarioSpec& spec,
                                                  const TrueParams& truth,
                                                  Rng& rng);

// Monte Carlo aggregate for one parameter in one scenario.
struct MetricsRow {
  std::string parameter;
  double truth = 0.0;    // mean of per-repetition truths
  double mc_mean = 0.0;  // mean of posterior means
  double bias = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double mean_sd = 0.0;  // mean posterior SD
  double coverage95 = 0.0;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  int n_reps_used = 0;
  int n_failed = 0;
};

struct ScenarioMetrics {
  ScenarioSpec spec;
  std::vector<MetricsRow> rows;
};

struct StudyMetrics {
  std::vector<ScenarioMetrics> scenarios;
};

// Error/coverage aggregation used by run_study; exposed for direct checks.
// Coverage is NaN when any interval bound is NaN.
MetricsRow aggregate_metrics(const std::string& parameter,
                             std::span<const double> estimates,
                             std::span<const double> sds,
                             std::span<const double> lower,
                             std::span<const double> upper,
                             std::span<const double> truth);

// Fits every (scenario, repetition) cell and aggregates bias/RMSE/MAE/mean
// posterior SD/coverage per parameter (theta, beta, w, phi; pi has no true
// value).  Repetitions run concurrently on `n_threads` workers (0 = hardware
// concurrency); results are deterministic given the scenario seeds.
// Repetitions whose fit fails are excluded and counted.
StudyMetrics run_study(std::span<const ScenarioSpec> grid,
                       const SamplerConfig& sampler,
                       const PriorConfig& priors = PriorConfig{},
                       int n_threads = 0);

// Refits category k of a K-composition as the 2-composition
// (complement, y_k), reusing the full model at K = 2 with category k as the
// non-reference component.  Returns one fit per category, in category order.
std::vector<PosteriorDraws> fit_individual_outcomes(
    const DbwqsData& data, const SamplerConfig& sampler,
    const PriorConfig& priors = PriorConfig{});

// Builds the 2-composition data for a single category (exposed for tests).
DbwqsData individual_outcome_data(const DbwqsData& data, std::size_t category);

struct CompareRow {
  int category = 0;  // 1-based, 2..K
  double truth = 0.0;
  double joint_bias = 0.0, joint_rmse = 0.0, joint_coverage95 = 0.0;
  double individual_bias = 0.0, individual_rmse = 0.0,
         individual_coverage95 = 0.0;
  int n_reps_used = 0;
};

struct CompareResult {
  ScenarioSpec spec;
  std::vector<CompareRow> rows;
  int n_failed = 0;
};

// Joint-versus-individual comparison on theta: for each non-reference
// category, the joint model's theta_k is compared against the theta of the
// individual 2-composition fit of category k, both against the same truth.
CompareResult compare_joint_individual(const ScenarioSpec& spec,
                                       const SamplerConfig& sampler,
                                       const PriorConfig& priors = PriorConfig{},
                                       int n_threads = 0);

}  // namespace dbwqs
