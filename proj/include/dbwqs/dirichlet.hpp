#pragma once

#include <span>
#include <vector>

#include "dbwqs/rng.hpp"

namespace dbwqs {

// Checks the simplex invariants (all entries > 0, sum within tol of 1);
// throws std::domain_error when violated.
void validate_simplex(std::span<const double> y, double tol = 1e-10);

// log Dirichlet(y | alpha) in the standard parameterization, evaluated
// entirely in log-gamma space.  Throws std::invalid_argument on dimension
// mismatch and std::domain_error when y or alpha leave the support.
double dirichlet_log_density(std::span<const double> y,
                             std::span<const double> alpha);

// Mean-precision parameterization: alpha_k = phi * mu_k, shared code path
// with the standard form.
double dirichlet_log_density_mean_precision(std::span<const double> y,
                                            std::span<const double> mu,
                                            double phi);

// Gamma(shape, rate 1) variate via Marsaglia-Tsang, with the u^(1/shape)
// boost for shape < 1.  Deterministic given the generator state.
double sample_gamma(double shape, Rng& rng);

// Dirichlet draw as normalized independent Gamma(alpha_k, 1) variates.
// Retries a bounded number of times if underflow yields a zero component,
// then throws std::runtime_error.
std::vector<double> sample_dirichlet(std::span<const double> alpha, Rng& rng);

}  // namespace dbwqs
