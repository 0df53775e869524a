#include "dbwqs/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>
#include <utility>

#include "dbwqs/errors.hpp"
#include "dbwqs/kernels.hpp"

// REFERENCE: Hoffman & Gelman (2014), The No-U-Turn Sampler, JMLR 15;
// trajectory sampling follows the multinomial scheme of Betancourt (2017),
// "A Conceptual Introduction to Hamiltonian Monte Carlo".

namespace dbwqs {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Phase {
  std::vector<double> q, p, grad;
  double logp = 0.0;

  double hamiltonian(std::span<const double> inv_mass) const {
    double kinetic = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d)
      kinetic += inv_mass[d] * p[d] * p[d];
    return -logp + 0.5 * kinetic;
  }
};

// One leapfrog step of signed length eps; returns false when the target is
// not finite at the new point.
bool leapfrog(const LogDensityGradFn& target, Phase& z, double eps,
              std::span<const double> inv_mass) {
  const std::size_t d = z.q.size();
  for (std::size_t i = 0; i < d; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  for (std::size_t i = 0; i < d; ++i) z.q[i] += eps * inv_mass[i] * z.p[i];
  z.logp = target(z.q, z.grad);
  if (!std::isfinite(z.logp)) return false;
  for (std::size_t i = 0; i < d; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  return true;
}

void sample_momentum(Phase& z, std::span<const double> inv_mass, Rng& rng) {
  for (std::size_t i = 0; i < z.p.size(); ++i)
    z.p[i] = rng.normal() / std::sqrt(inv_mass[i]);
}

// No-U-turn check between trajectory endpoints, momenta mapped through the
// inverse mass matrix.
bool uturn(const Phase& minus, const Phase& plus,
           std::span<const double> inv_mass) {
  const std::size_t d = minus.q.size();
  double dot_minus = 0.0, dot_plus = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double dq = plus.q[i] - minus.q[i];
    dot_minus += dq * inv_mass[i] * minus.p[i];
    dot_plus += dq * inv_mass[i] * plus.p[i];
  }
  return dot_minus < 0.0 || dot_plus < 0.0;
}

double log_sum_exp2(double a, double b) {
  const double m = std::max(a, b);
  if (m == kNegInf) return kNegInf;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Subtree {
  Phase minus, plus;
  std::vector<double> q_prop;
  double h_prop = 0.0;
  double log_weight = kNegInf;  // log sum over leaves of exp(h0 - h)
  double sum_accept = 0.0;
  int n_leaf = 0;
  bool divergent = false;
  bool turned = false;
};

// Builds a balanced subtree of 2^depth leapfrog states extending from `edge`
// in direction sign(eps); multinomial weights accumulate relative to h0.
Subtree build_tree(const LogDensityGradFn& target, const Phase& edge,
                   int depth, double eps, double h0,
                   std::span<const double> inv_mass, double energy_threshold,
                   Rng& rng) {
  if (depth == 0) {
    Subtree leaf;
    leaf.minus = edge;
    if (!leapfrog(target, leaf.minus, eps, inv_mass)) {
      leaf.divergent = true;
      leaf.n_leaf = 1;
      return leaf;
    }
    const double h = leaf.minus.hamiltonian(inv_mass);
    const double log_w = h0 - h;
    leaf.n_leaf = 1;
    leaf.sum_accept = std::min(1.0, std::exp(log_w));
    if (!(h - h0 < energy_threshold)) {
      leaf.divergent = true;
      return leaf;
    }
    leaf.plus = leaf.minus;
    leaf.q_prop = leaf.minus.q;
    leaf.h_prop = h;
    leaf.log_weight = log_w;
    return leaf;
  }

  Subtree first = build_tree(target, edge, depth - 1, eps, h0, inv_mass,
                             energy_threshold, rng);
  if (first.divergent || first.turned) return first;

  const Phase& grow_from = eps > 0.0 ? first.plus : first.minus;
  Subtree second = build_tree(target, grow_from, depth - 1, eps, h0, inv_mass,
                              energy_threshold, rng);

  first.sum_accept += second.sum_accept;
  first.n_leaf += second.n_leaf;
  if (second.divergent) {
    first.divergent = true;
    return first;
  }

  // Uniform (unbiased) multinomial merge inside a subtree.
  const double total = log_sum_exp2(first.log_weight, second.log_weight);
  if (total > kNegInf &&
      std::log(rng.uniform01()) < second.log_weight - total) {
    first.q_prop = std::move(second.q_prop);
    first.h_prop = second.h_prop;
  }
  first.log_weight = total;
  if (eps > 0.0)
    first.plus = std::move(second.plus);
  else
    first.minus = std::move(second.minus);
  first.turned = second.turned || uturn(first.minus, first.plus, inv_mass);
  return first;
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_chains < 1) throw std::invalid_argument("n_chains must be >= 1");
  if (n_warmup < 0 || n_warmup >= n_iter)
    throw std::invalid_argument("require 0 <= n_warmup < n_iter");
  if (!(target_accept > 0.0 && target_accept < 1.0))
    throw std::invalid_argument("target_accept must be in (0, 1)");
  if (max_tree_depth < 1 || max_tree_depth > 20)
    throw std::invalid_argument("max_tree_depth must be in [1, 20]");
  if (!(energy_error_threshold > 0.0))
    throw std::invalid_argument("energy_error_threshold must be > 0");
}

NutsResult nuts_transition(const LogDensityGradFn& target,
                           std::vector<double>& position, double step_size,
                           std::span<const double> inv_mass,
                           int max_tree_depth, Rng& rng,
                           double energy_error_threshold) {
  const std::size_t d = position.size();
  Phase z0;
  z0.q = position;
  z0.p.resize(d);
  z0.grad.resize(d);
  z0.logp = target(z0.q, z0.grad);
  if (!std::isfinite(z0.logp))
    throw InferenceError("log posterior not finite at current position");
  sample_momentum(z0, inv_mass, rng);
  const double h0 = z0.hamiltonian(inv_mass);

  Phase minus = z0, plus = z0;
  std::vector<double> q_prop = z0.q;
  double h_prop = h0;
  double log_weight = 0.0;  // weight of the initial point
  double sum_accept = 0.0;
  int n_leaf = 0;

  NutsResult result;
  for (int depth = 0; depth < max_tree_depth; ++depth) {
    const double dir_eps = rng.uniform01() < 0.5 ? -step_size : step_size;
    const Phase& edge = dir_eps > 0.0 ? plus : minus;
    Subtree sub = build_tree(target, edge, depth, dir_eps, h0, inv_mass,
                             energy_error_threshold, rng);
    sum_accept += sub.sum_accept;
    n_leaf += sub.n_leaf;
    result.stats.tree_depth = depth + 1;

    if (sub.divergent) {
      result.stats.divergent = true;
      break;
    }
    if (sub.turned) break;

    // Biased progressive sampling: the fresh subtree's candidate is taken
    // with probability min(1, w_new / w_old).
    if (std::log(rng.uniform01()) < sub.log_weight - log_weight) {
      q_prop = std::move(sub.q_prop);
      h_prop = sub.h_prop;
    }
    log_weight = log_sum_exp2(log_weight, sub.log_weight);
    if (dir_eps > 0.0)
      plus = std::move(sub.plus);
    else
      minus = std::move(sub.minus);
    if (uturn(minus, plus, inv_mass)) break;
  }

  result.stats.n_leapfrog = n_leaf;
  result.stats.accept_stat =
      n_leaf > 0 ? sum_accept / static_cast<double>(n_leaf) : 1.0;
  if (result.stats.divergent) {
    result.stats.energy = h0;  // draw repeats the previous position
  } else {
    position = std::move(q_prop);
    result.stats.energy = h_prop;
  }
  return result;
}

namespace {

// Nesterov dual averaging on log step size (Hoffman & Gelman 2014, Sec. 3.2).
class DualAveraging {
 public:
  DualAveraging(double eps0, double delta)
      : mu_(std::log(10.0 * eps0)),
        log_eps_(std::log(eps0)),
        delta_(delta) {}

  void update(double accept) {
    ++m_;
    const double eta = 1.0 / (m_ + kT0);
    h_bar_ = (1.0 - eta) * h_bar_ + eta * (delta_ - accept);
    log_eps_ = mu_ - std::sqrt(static_cast<double>(m_)) / kGamma * h_bar_;
    const double weight = std::pow(static_cast<double>(m_), -kKappa);
    log_eps_bar_ = weight * log_eps_ + (1.0 - weight) * log_eps_bar_;
  }

  double current() const { return std::exp(log_eps_); }
  double averaged() const { return m_ > 0 ? std::exp(log_eps_bar_) : current(); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double mu_, log_eps_;
  double log_eps_bar_ = 0.0;
  double h_bar_ = 0.0;
  long m_ = 0;
  double delta_;
};

// Heuristic initial step size (Hoffman & Gelman 2014, Algorithm 4): double or
// halve until the one-step acceptance probability crosses 1/2.
double find_initial_step_size(const LogDensityGradFn& target,
                              std::span<const double> position,
                              std::span<const double> inv_mass, Rng& rng) {
  const std::size_t d = position.size();
  Phase z0;
  z0.q.assign(position.begin(), position.end());
  z0.p.resize(d);
  z0.grad.resize(d);
  z0.logp = target(z0.q, z0.grad);
  if (!std::isfinite(z0.logp))
    throw InferenceError("log posterior not finite at initialization point");
  sample_momentum(z0, inv_mass, rng);
  const double h0 = z0.hamiltonian(inv_mass);

  auto log_accept = [&](double eps) {
    Phase z = z0;
    if (!leapfrog(target, z, eps, inv_mass)) return kNegInf;
    const double h = z.hamiltonian(inv_mass);
    return std::isfinite(h) ? h0 - h : kNegInf;
  };

  double eps = 1.0;
  const double log_half = -0.6931471805599453;
  double la = log_accept(eps);
  const double direction = la > log_half ? 1.0 : -1.0;
  for (int iter = 0; iter < 100; ++iter) {
    eps = direction > 0.0 ? 2.0 * eps : 0.5 * eps;
    if (eps < 1e-17)
      throw InferenceError("cannot adapt: initial step size underflow");
    if (eps > 1e7) break;
    la = log_accept(eps);
    if (direction > 0.0 ? la <= log_half : la > log_half) break;
  }
  return eps;
}

struct AdaptWindows {
  int init_end = 0;    // step-size-only buffer
  int term_start = 0;  // final step-size-only buffer
  std::vector<int> window_ends;
};

AdaptWindows plan_windows(int n_warmup, bool adapt_mass) {
  AdaptWindows plan;
  if (!adapt_mass) {
    plan.init_end = n_warmup;
    plan.term_start = n_warmup;
    return plan;
  }
  // The terminal buffer re-tunes the step size against the final metric; it
  // needs enough iterations for the averaged iterate to settle on the
  // target-acceptance root.
  int init = 75, term = std::max(50, n_warmup / 5), base = 25;
  if (init + base + term > n_warmup) {
    init = static_cast<int>(0.15 * n_warmup);
    term = static_cast<int>(0.20 * n_warmup);
    base = n_warmup - init - term;
  }
  plan.init_end = init;
  plan.term_start = n_warmup - term;
  int start = init, width = base;
  while (start < plan.term_start) {
    int end = start + width;
    // Absorb a final short window into the last full one.
    if (end + 2 * width > plan.term_start) end = plan.term_start;
    plan.window_ends.push_back(std::min(end, plan.term_start));
    start = plan.window_ends.back();
    width *= 2;
  }
  return plan;
}

// Per-coordinate scale estimate over a warm-up window.  Uses the MAD rather
// than the sample variance: a single excursion into a heavy posterior tail
// (the pi-w funnel produces these) would otherwise blow up one coordinate's
// metric entry and stall every trajectory with premature U-turns.
class WindowScale {
 public:
  void add(std::span<const double> x) {
    if (samples_.empty()) samples_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) samples_[i].push_back(x[i]);
    ++n_;
  }
  long count() const { return n_; }
  std::vector<double> regularized() const {
    std::vector<double> v(samples_.size());
    const double n = static_cast<double>(n_);
    std::vector<double> buf;
    for (std::size_t i = 0; i < v.size(); ++i) {
      buf = samples_[i];
      const double med = median_inplace(buf);
      for (auto& b : buf) b = std::abs(b - med);
      // 1.4826 makes the MAD consistent for the normal distribution.
      const double sd = 1.4826 * median_inplace(buf);
      const double var = sd * sd;
      v[i] = n / (n + 5.0) * var + 1e-3 * (5.0 / (n + 5.0));
    }
    return v;
  }
  void reset() {
    samples_.clear();
    n_ = 0;
  }

 private:
  static double median_inplace(std::vector<double>& x) {
    const std::size_t h = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + h, x.end());
    double m = x[h];
    if (x.size() % 2 == 0) {
      std::nth_element(x.begin(), x.begin() + h - 1, x.begin() + h);
      m = 0.5 * (m + x[h - 1]);
    }
    return m;
  }

  std::vector<std::vector<double>> samples_;
  long n_ = 0;
};

}  // namespace

WarmupResult warmup_adapt(const LogDensityGradFn& target,
                          std::vector<double>& position,
                          const SamplerConfig& config, Rng& rng) {
  if (config.n_warmup < 50)
    throw std::invalid_argument("warm-up adaptation needs n_warmup >= 50");
  const std::size_t d = position.size();
  WarmupResult out;
  out.inv_mass.assign(d, 1.0);

  const AdaptWindows plan =
      plan_windows(config.n_warmup, config.adapt_mass_matrix);
  double eps = find_initial_step_size(target, position, out.inv_mass, rng);
  DualAveraging da(eps, config.target_accept);
  WindowScale variance;
  std::size_t next_window = 0;

  for (int iter = 0; iter < config.n_warmup; ++iter) {
    NutsResult res =
        nuts_transition(target, position, eps, out.inv_mass,
                        config.max_tree_depth, rng,
                        config.energy_error_threshold);
    if (res.stats.divergent) ++out.n_divergent;
    da.update(res.stats.accept_stat);
    eps = da.current();

    const bool in_window = iter >= plan.init_end && iter < plan.term_start;
    if (in_window) variance.add(position);
    if (next_window < plan.window_ends.size() &&
        iter + 1 == plan.window_ends[next_window]) {
      if (variance.count() >= 2) {
        out.inv_mass = variance.regularized();
        // Metric changed: restart step-size adaptation around a fresh guess.
        eps = find_initial_step_size(target, position, out.inv_mass, rng);
        da = DualAveraging(eps, config.target_accept);
      }
      variance.reset();
      ++next_window;
    }
  }
  if (out.n_divergent == config.n_warmup)
    throw InferenceError("cannot adapt: every warm-up iteration diverged");
  out.step_size = da.averaged();
  return out;
}

ChainResult run_nuts_chain(const LogDensityGradFn& target,
                           std::vector<double> init,
                           const SamplerConfig& config, Rng& rng) {
  config.validate();
  std::vector<double> position = std::move(init);
  WarmupResult warm = warmup_adapt(target, position, config, rng);

  ChainResult chain;
  chain.step_size = warm.step_size;
  chain.inv_mass = warm.inv_mass;
  const int kept = config.n_kept();
  chain.draws = Matrix(kept, position.size());
  chain.stats.resize(kept);
  for (int iter = 0; iter < kept; ++iter) {
    NutsResult res = nuts_transition(target, position, chain.step_size,
                                     chain.inv_mass, config.max_tree_depth,
                                     rng, config.energy_error_threshold);
    chain.stats[iter] = res.stats;
    if (res.stats.divergent) ++chain.n_divergent;
    auto row = chain.draws.row(iter);
    std::copy(position.begin(), position.end(), row.begin());
  }
  return chain;
}

std::vector<double> PosteriorDraws::chain_column(std::size_t chain,
                                                 std::size_t param) const {
  const Matrix& m = constrained[chain];
  std::vector<double> col(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) col[i] = m(i, param);
  return col;
}

ParameterState PosteriorDraws::state_at(std::size_t chain,
                                        std::size_t iter) const {
  return state_from_constrained(constrained[chain].row(iter), dims);
}

PosteriorDraws run_chains(const DbwqsData& data, const PriorConfig& priors,
                          const SamplerConfig& config) {
  config.validate();
  const DbwqsModel model(data, priors);
  const ModelDims dims = model.dims();
  const std::size_t d = dims.dim();

  PosteriorDraws out;
  out.dims = dims;
  out.names = constrained_names(dims);
  out.chains.resize(config.n_chains);
  out.constrained.resize(config.n_chains);

  std::vector<std::exception_ptr> failures(config.n_chains);
  auto run_one = [&](int c) {
    try {
      Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(c));
      DbwqsModel::Workspace ws = model.make_workspace();
      LogDensityGradFn target = [&model, &ws](std::span<const double> q,
                                              std::span<double> g) {
        return model.log_posterior_grad(q, g, ws);
      };
      // Jittered initialization; rejected starting points are redrawn.
      std::vector<double> init(d);
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        for (auto& v : init) v = rng.uniform(-1.0, 1.0);
        std::vector<double> g(d);
        ok = std::isfinite(target(init, g));
      }
      if (!ok)
        throw InferenceError("could not find a finite initialization point");
      out.chains[c] = run_nuts_chain(target, std::move(init), config, rng);

      const std::size_t kept = out.chains[c].draws.rows();
      Matrix cons(kept, constrained_size(dims));
      for (std::size_t i = 0; i < kept; ++i) {
        const auto flat =
            flatten_constrained(constrain(out.chains[c].draws.row(i), dims).state);
        std::copy(flat.begin(), flat.end(), cons.row(i).begin());
      }
      out.constrained[c] = std::move(cons);
    } catch (...) {
      failures[c] = std::current_exception();
    }
  };

  if (config.parallel_chains && config.n_chains > 1) {
    std::vector<std::thread> workers;
    workers.reserve(config.n_chains);
    for (int c = 0; c < config.n_chains; ++c) workers.emplace_back(run_one, c);
    for (auto& t : workers) t.join();
  } else {
    for (int c = 0; c < config.n_chains; ++c) run_one(c);
  }
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

}  // namespace dbwqs
