#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dbwqs/matrix.hpp"
#include "dbwqs/quantiles.hpp"

namespace dbwqs {

// Hyperparameters for the weakly informative priors: Normal(0, sigma) on the
// regression coefficients, Gamma(a, b) (shape-rate) on the precision and on
// the mixture-weight concentration parameters.
struct PriorConfig {
  double sigma_beta = 100.0;
  double sigma_theta = 100.0;
  double a_phi = 0.001;
  double b_phi = 0.001;
  double a_pi = 2.0;
  double b_pi = 2.0;

  void validate() const;
};

// Observed data: compositional outcome rows y_i on the K-simplex, integer
// quantile scores q, and optional covariates x (J may be 0).  All share N.
struct DbwqsData {
  Matrix y;
  QuantileMatrix q;
  Matrix x;

  std::size_t n() const { return y.rows(); }
  std::size_t n_categories() const { return y.cols(); }
  std::size_t n_exposures() const { return q.cols; }
  std::size_t n_covariates() const { return x.cols(); }

  // Validates shapes and row simplex invariants; throws std::invalid_argument
  // or std::domain_error.
  static DbwqsData create(Matrix y, QuantileMatrix q, Matrix x);
};

enum class ZeroPolicy { kReject, kReplace };

// kReplace swaps exact zeros for epsilon and renormalizes the row; kReject
// leaves the data untouched (zero rows then fail simplex validation).
void apply_zero_policy(Matrix& y, ZeroPolicy policy, double epsilon = 1e-6);

// Constrained model parameters.  Category 0 is the reference: theta[0] and
// beta row 0 are identically zero.
struct ParameterState {
  std::vector<double> theta;  // length K
  Matrix beta;                // K x J
  std::vector<double> w;      // length M, on the simplex
  std::vector<double> pi;     // length M, positive
  double phi = 1.0;           // positive
};

// Shape bookkeeping for the unconstrained vector, ordered
// (theta_2..K, beta rows 2..K, stick latents, log pi, log phi).
struct ModelDims {
  std::size_t n = 0, K = 0, M = 0, J = 0;

  std::size_t theta_offset() const { return 0; }
  std::size_t beta_offset() const { return K - 1; }
  std::size_t stick_offset() const { return (K - 1) * (1 + J); }
  std::size_t logpi_offset() const { return stick_offset() + (M - 1); }
  std::size_t logphi_offset() const { return logpi_offset() + M; }
  std::size_t dim() const { return logphi_offset() + 1; }
};

struct ConstrainResult {
  ParameterState state;
  double log_jacobian = 0.0;
};

// Total transform from unconstrained coordinates to the constrained state:
// stick-breaking for w, exp for pi and phi, identity (with fixed reference
// zeros) for theta and beta.
ConstrainResult constrain(std::span<const double> v, const ModelDims& dims);
std::vector<double> unconstrain(const ParameterState& state,
                                const ModelDims& dims);

// Weighted quantile sum index S = sum_m q_m w_m for one subject.
double mixture_index(std::span<const int> q_row, std::span<const double> w);

// Multinomial-logit means mu_{i,k} = softmax_k(S_i theta_k + x_i beta_k),
// log-sum-exp stabilized; every returned row sums to 1.
Matrix compute_means(std::span<const double> S, const Matrix& x,
                     std::span<const double> theta, const Matrix& beta);

// Names and packing for the constrained parameter vector in reporting order:
// theta_2..theta_K, beta_k_j, w_1..w_M, pi_1..pi_M, phi.
std::vector<std::string> constrained_names(const ModelDims& dims);
std::size_t constrained_size(const ModelDims& dims);
std::vector<double> flatten_constrained(const ParameterState& state);
ParameterState state_from_constrained(std::span<const double> flat,
                                      const ModelDims& dims);

// Joint DBWQS log posterior over unconstrained coordinates.  Evaluations are
// pure; the workspace only carries scratch buffers, so use one workspace per
// thread and share the model read-only.
class DbwqsModel {
 public:
  struct Workspace {
    std::vector<double> theta, beta, w, pi, lnw, z, rem;
    std::vector<double> S, rowmax, denom, r, dS;
    std::vector<double> eta, e, mu, alpha, lg, ps;
    std::vector<double> gw;
  };

  DbwqsModel(DbwqsData data, PriorConfig priors);

  const ModelDims& dims() const { return dims_; }
  const DbwqsData& data() const { return data_; }
  const PriorConfig& priors() const { return priors_; }

  Workspace make_workspace() const;

  // Returns the log posterior (including the transform Jacobian) and fills
  // grad with its gradient.  States outside the support come back as -inf
  // with unspecified gradient contents; no exceptions on the hot path.
  double log_posterior_grad(std::span<const double> v, std::span<double> grad,
                            Workspace& ws) const;
  double log_posterior(std::span<const double> v, Workspace& ws) const;
  double log_posterior(std::span<const double> v) const;

  // Constrained-space log posterior without the Jacobian term; the slow,
  // readable route used for cross-checks and reporting.
  double log_posterior_constrained(const ParameterState& state) const;

 private:
  double eval(std::span<const double> v, std::span<double> grad,
              bool want_grad, Workspace& ws) const;

  DbwqsData data_;
  PriorConfig priors_;
  ModelDims dims_;
  // Column-major caches (column c occupies [c*n, (c+1)*n)).
  std::vector<double> logy_cm_, q_cm_, x_cm_;
  double sum_logy_ = 0.0;
};

}  // namespace dbwqs
