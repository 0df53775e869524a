#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dbwqs/matrix.hpp"
#include "dbwqs/model.hpp"
#include "dbwqs/rng.hpp"

namespace dbwqs {

struct SamplerConfig {
  int n_chains = 2;
  int n_iter = 10000;
  int n_warmup = 2000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  double energy_error_threshold = 1000.0;  // divergence cutoff
  std::uint64_t seed = 1;
  bool adapt_mass_matrix = true;
  // When false, chains run sequentially on the calling thread (used when an
  // outer layer already parallelizes, e.g. simulation repetitions).
  bool parallel_chains = true;

  int n_kept() const { return n_iter - n_warmup; }
  void validate() const;
};

// Target contract: returns the log density at q and fills grad; must be pure
// and safe to call concurrently from the chain that owns it.  Out-of-support
// states return -inf (gradient contents then unspecified).
using LogDensityGradFn =
    std::function<double(std::span<const double>, std::span<double>)>;

struct IterStats {
  double accept_stat = 0.0;
  int tree_depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
  double energy = 0.0;  // Hamiltonian of the stored draw
};

struct NutsResult {
  IterStats stats;
};

// One NUTS transition with multinomial sampling along the trajectory and a
// diagonal mass matrix (inv_mass ~ posterior variances).  Momentum is
// refreshed internally.  A divergence (energy error beyond the threshold)
// rejects the whole transition: `position` is left unchanged and the flag is
// set.
NutsResult nuts_transition(const LogDensityGradFn& target,
                           std::vector<double>& position, double step_size,
                           std::span<const double> inv_mass,
                           int max_tree_depth, Rng& rng,
                           double energy_error_threshold = 1000.0);

struct WarmupResult {
  double step_size = 0.0;
  std::vector<double> inv_mass;
  int n_divergent = 0;
};

// Dual-averaging step-size adaptation toward target_accept, with windowed
// diagonal mass-matrix estimation from the middle of warm-up.  Advances
// `position` through the warm-up iterations.  Throws InferenceError when
// every warm-up iteration diverges.
WarmupResult warmup_adapt(const LogDensityGradFn& target,
                          std::vector<double>& position,
                          const SamplerConfig& config, Rng& rng);

struct ChainResult {
  Matrix draws;                 // n_kept x D, unconstrained
  std::vector<IterStats> stats; // per kept iteration
  double step_size = 0.0;
  std::vector<double> inv_mass;
  int n_divergent = 0;          // post-warmup count
};

// Warm-up plus sampling for a single chain from the given initial point.
ChainResult run_nuts_chain(const LogDensityGradFn& target,
                           std::vector<double> init,
                           const SamplerConfig& config, Rng& rng);

// Posterior draws for the DBWQS model: per chain, unconstrained draws plus
// the constrained parameter view in reporting order (constrained_names).
struct PosteriorDraws {
  ModelDims dims;
  std::vector<std::string> names;
  std::vector<ChainResult> chains;
  std::vector<Matrix> constrained;  // per chain: n_kept x names.size()

  std::size_t n_chains() const { return constrained.size(); }
  std::size_t n_kept() const {
    return constrained.empty() ? 0 : constrained[0].rows();
  }
  // Draws of one constrained parameter from one chain.
  std::vector<double> chain_column(std::size_t chain, std::size_t param) const;
  ParameterState state_at(std::size_t chain, std::size_t iter) const;
};

// Runs config.n_chains independent NUTS chains over the DBWQS posterior.
// Chains are initialized from jittered uniform(-1, 1) unconstrained draws
// with per-chain RNG streams split off the seed; results are independent of
// chain scheduling.
PosteriorDraws run_chains(const DbwqsData& data, const PriorConfig& priors,
                          const SamplerConfig& config);

}  // namespace dbwqs
