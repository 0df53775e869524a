#include "dbwqs/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "dbwqs/csv.hpp"
#include "dbwqs/diagnostics.hpp"
#include "dbwqs/effects.hpp"
#include "dbwqs/errors.hpp"
#include "dbwqs/kernels.hpp"
#include "dbwqs/quantiles.hpp"

namespace dbwqs {

namespace {

using json = nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  return j;
}

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return it.key() == k;
        }) == allowed.end())
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

PriorConfig parse_priors(const json& j) {
  PriorConfig p;
  require_keys(j, {"sigma_beta", "sigma_theta", "a_phi", "b_phi", "a_pi", "b_pi"},
               "priors");
  p.sigma_beta = get_or(j, "sigma_beta", p.sigma_beta);
  p.sigma_theta = get_or(j, "sigma_theta", p.sigma_theta);
  p.a_phi = get_or(j, "a_phi", p.a_phi);
  p.b_phi = get_or(j, "b_phi", p.b_phi);
  p.a_pi = get_or(j, "a_pi", p.a_pi);
  p.b_pi = get_or(j, "b_pi", p.b_pi);
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid priors: ") + e.what());
  }
  return p;
}

SamplerConfig parse_sampler(const json& j) {
  SamplerConfig s;
  require_keys(j,
               {"n_chains", "n_iter", "n_warmup", "target_accept",
                "max_tree_depth", "energy_error_threshold", "seed",
                "adapt_mass_matrix"},
               "sampler");
  s.n_chains = get_or(j, "n_chains", s.n_chains);
  s.n_iter = get_or(j, "n_iter", s.n_iter);
  s.n_warmup = get_or(j, "n_warmup", s.n_warmup);
  s.target_accept = get_or(j, "target_accept", s.target_accept);
  s.max_tree_depth = get_or(j, "max_tree_depth", s.max_tree_depth);
  s.energy_error_threshold =
      get_or(j, "energy_error_threshold", s.energy_error_threshold);
  s.seed = get_or(j, "seed", s.seed);
  s.adapt_mass_matrix = get_or(j, "adapt_mass_matrix", s.adapt_mass_matrix);
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid sampler config: ") + e.what());
  }
  return s;
}

ScenarioSpec parse_scenario(const json& j, std::uint64_t default_seed) {
  ScenarioSpec s;
  require_keys(j, {"n", "K", "M", "J", "phi", "rho", "reps", "seed"},
               "scenario");
  s.n = get_or(j, "n", s.n);
  s.K = get_or(j, "K", s.K);
  s.M = get_or(j, "M", s.M);
  s.J = get_or(j, "J", s.J);
  s.phi = get_or(j, "phi", s.phi);
  s.rho = get_or(j, "rho", s.rho);
  s.reps = get_or(j, "reps", s.reps);
  s.seed = get_or(j, "seed", default_seed);
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
  return s;
}

std::vector<double> list_of_numbers(const json& j, const char* key) {
  if (j.at(key).is_array()) return j.at(key).get<std::vector<double>>();
  return {j.at(key).get<double>()};
}

// Grid given as an object of scalar-or-list values expands to the cross
// product in n, K, M, J, rho order; per-scenario seeds derive from the base
// seed and the scenario index.
std::vector<ScenarioSpec> expand_grid(const json& g, int reps,
                                      std::uint64_t base_seed) {
  require_keys(g, {"n", "K", "M", "J", "phi", "rho"}, "grid");
  auto nl = g.contains("n") ? list_of_numbers(g, "n") : std::vector<double>{150};
  auto kl = g.contains("K") ? list_of_numbers(g, "K") : std::vector<double>{3};
  auto ml = g.contains("M") ? list_of_numbers(g, "M") : std::vector<double>{3};
  auto jl = g.contains("J") ? list_of_numbers(g, "J") : std::vector<double>{0};
  auto pl = g.contains("phi") ? list_of_numbers(g, "phi") : std::vector<double>{5};
  auto rl = g.contains("rho") ? list_of_numbers(g, "rho") : std::vector<double>{0.3};
  if (pl.size() != 1)
    throw ConfigError("grid phi must be a single value");
  std::vector<ScenarioSpec> out;
  std::size_t idx = 0;
  for (double n : nl)
    for (double K : kl)
      for (double M : ml)
        for (double J : jl)
          for (double rho : rl) {
            ScenarioSpec s;
            s.n = static_cast<int>(n);
            s.K = static_cast<int>(K);
            s.M = static_cast<int>(M);
            s.J = static_cast<int>(J);
            s.phi = pl[0];
            s.rho = rho;
            s.reps = reps;
            s.seed = splitmix64(splitmix64(base_seed) ^ (idx + 1));
            ++idx;
            try {
              s.validate();
            } catch (const std::exception& e) {
              throw ConfigError(std::string("invalid grid value: ") + e.what());
            }
            out.push_back(s);
          }
  return out;
}

ZeroPolicy parse_zero_policy(const std::string& text, double& epsilon) {
  if (text == "reject") return ZeroPolicy::kReject;
  if (text.rfind("replace", 0) == 0) {
    if (text.size() > 7) {
      if (text[7] != ':') throw ConfigError("bad zero_policy: " + text);
      epsilon = parse_double(text.substr(8));
      if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ConfigError("zero_policy epsilon must be in (0, 1)");
    }
    return ZeroPolicy::kReplace;
  }
  throw ConfigError("zero_policy must be 'reject' or 'replace:EPS'");
}

std::string zero_policy_text(const RunConfig& c) {
  if (c.zero_policy == ZeroPolicy::kReject) return "reject";
  return "replace:" + format_g17(c.zero_epsilon);
}

}  // namespace

RunConfig load_run_config(const std::string& path, Command command) {
  const json j = load_json(path);
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  RunConfig c;
  c.command = command;

  require_keys(j,
               {"input", "outcome_columns", "exposure_columns",
                "covariate_columns", "n_quantiles", "zero_policy",
                "write_draws", "rank_normalized_rhat", "grid", "reps", "seed",
                "scenario", "priors", "sampler", "out", "threads"},
               "config");

  if (j.contains("priors")) c.priors = parse_priors(j.at("priors"));
  if (j.contains("sampler")) c.sampler = parse_sampler(j.at("sampler"));
  c.out_dir = get_or<std::string>(j, "out", c.out_dir);
  c.threads = get_or(j, "threads", c.threads);

  const std::uint64_t base_seed =
      get_or<std::uint64_t>(j, "seed", c.sampler.seed);
  c.sampler.seed = base_seed;

  switch (command) {
    case Command::kFit: {
      if (!j.contains("input")) throw ConfigError("fit config needs 'input'");
      c.input = j.at("input").get<std::string>();
      c.outcome_columns =
          get_or(j, "outcome_columns", std::vector<std::string>{});
      c.exposure_columns =
          get_or(j, "exposure_columns", std::vector<std::string>{});
      c.covariate_columns =
          get_or(j, "covariate_columns", std::vector<std::string>{});
      if (c.outcome_columns.size() < 2)
        throw ConfigError("need at least 2 outcome_columns");
      if (c.exposure_columns.empty())
        throw ConfigError("need at least 1 exposure column");
      c.n_quantiles = get_or(j, "n_quantiles", c.n_quantiles);
      if (c.n_quantiles < 2) throw ConfigError("n_quantiles must be >= 2");
      if (j.contains("zero_policy"))
        c.zero_policy = parse_zero_policy(
            j.at("zero_policy").get<std::string>(), c.zero_epsilon);
      c.write_draws = get_or(j, "write_draws", c.write_draws);
      c.rank_normalized_rhat =
          get_or(j, "rank_normalized_rhat", c.rank_normalized_rhat);
      break;
    }
    case Command::kSimulate: {
      if (!j.contains("grid")) throw ConfigError("simulate config needs 'grid'");
      const int reps = get_or(j, "reps", 100);
      if (reps < 1) throw ConfigError("reps must be >= 1");
      if (j.at("grid").is_array()) {
        std::size_t idx = 0;
        for (const auto& g : j.at("grid")) {
          ScenarioSpec s = parse_scenario(
              g, splitmix64(splitmix64(base_seed) ^ (idx + 1)));
          if (!g.contains("reps")) s.reps = reps;
          try {
            s.validate();
          } catch (const std::exception& e) {
            throw ConfigError(std::string("invalid scenario: ") + e.what());
          }
          c.grid.push_back(s);
          ++idx;
        }
        if (c.grid.empty()) throw ConfigError("empty scenario grid");
      } else if (j.at("grid").is_object()) {
        c.grid = expand_grid(j.at("grid"), reps, base_seed);
      } else {
        throw ConfigError("'grid' must be an object or an array");
      }
      break;
    }
    case Command::kCompare: {
      if (!j.contains("scenario"))
        throw ConfigError("compare config needs a 'scenario' block");
      c.compare_scenario = parse_scenario(j.at("scenario"), base_seed);
      break;
    }
  }
  return c;
}

void apply_overrides(RunConfig& config, std::optional<std::uint64_t> seed,
                     std::optional<std::string> out_dir,
                     std::optional<std::string> zero_policy) {
  if (seed) {
    config.sampler.seed = *seed;
    for (std::size_t i = 0; i < config.grid.size(); ++i)
      config.grid[i].seed = splitmix64(splitmix64(*seed) ^ (i + 1));
    if (config.compare_scenario) config.compare_scenario->seed = *seed;
  }
  if (out_dir) config.out_dir = *out_dir;
  if (zero_policy)
    config.zero_policy = parse_zero_policy(*zero_policy, config.zero_epsilon);
}

namespace {

// ---- fit ----------------------------------------------------------------

Matrix extract_columns(const CsvTable& table,
                       const std::vector<std::string>& names) {
  Matrix out(table.rows.size(), names.size());
  std::vector<std::size_t> idx;
  for (const auto& n : names) idx.push_back(table.column(n));
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j) {
      try {
        out(i, j) = parse_double(table.rows[i][idx[j]]);
      } catch (const ConfigError&) {
        throw ConfigError("row " + std::to_string(i + 1) + ", column '" +
                          names[j] + "': not a number");
      }
    }
  return out;
}

void normalize_outcome_rows(Matrix& y) {
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < y.cols(); ++k) {
      if (!(y(i, k) > 0.0))
        throw ConfigError("row " + std::to_string(i + 1) +
                          " not on simplex (non-positive proportion)");
      total += y(i, k);
    }
    if (std::abs(total - 1.0) > 1e-6)
      throw ConfigError("row " + std::to_string(i + 1) +
                        " not on simplex (sum = " + format_g17(total) + ")");
    for (std::size_t k = 0; k < y.cols(); ++k) y(i, k) /= total;
  }
}

CsvTable summary_table(const std::vector<ParameterSummary>& summaries) {
  CsvTable t;
  t.header = {"parameter",   "mean",        "sd",
              "cri95_lower", "cri95_upper", "cri80_lower",
              "cri80_upper", "ess",         "rhat"};
  for (const auto& s : summaries)
    t.rows.push_back({s.name, format_g17(s.mean), format_g17(s.sd),
                      format_g17(s.cri95_lower), format_g17(s.cri95_upper),
                      format_g17(s.cri80_lower), format_g17(s.cri80_upper),
                      format_g17(s.ess), format_g17(s.rhat)});
  return t;
}

std::vector<ParameterSummary> summarize_all(const PosteriorDraws& draws,
                                            bool rank_normalized) {
  std::vector<ParameterSummary> out;
  for (std::size_t p = 0; p < draws.names.size(); ++p) {
    ChainDraws cd(draws.n_chains());
    for (std::size_t c = 0; c < draws.n_chains(); ++c)
      cd[c] = draws.chain_column(c, p);
    ParameterSummary s = summarize(cd, draws.names[p]);
    if (rank_normalized && draws.n_chains() >= 2)
      s.rhat = split_rhat_rank_normalized(cd);
    out.push_back(std::move(s));
  }
  return out;
}

void write_fit_outputs(const RunConfig& config, const PosteriorDraws& draws,
                       const DbwqsData& data) {
  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  const auto path = [&](const char* name) {
    return (fs::path(config.out_dir) / name).string();
  };

  const auto summaries = summarize_all(draws, config.rank_normalized_rhat);
  write_csv(path("summary.csv"), summary_table(summaries));

  // Mixture weights under their exposure names (bar-plot data).
  {
    CsvTable t;
    t.header = {"exposure",    "mean",        "sd",
                "cri95_lower", "cri95_upper", "cri80_lower",
                "cri80_upper", "ess",         "rhat"};
    const std::size_t w0 = (draws.dims.K - 1) * (1 + draws.dims.J);
    for (std::size_t m = 0; m < draws.dims.M; ++m) {
      const auto& s = summaries[w0 + m];
      t.rows.push_back({config.exposure_columns[m], format_g17(s.mean),
                        format_g17(s.sd), format_g17(s.cri95_lower),
                        format_g17(s.cri95_upper), format_g17(s.cri80_lower),
                        format_g17(s.cri80_upper), format_g17(s.ess),
                        format_g17(s.rhat)});
    }
    write_csv(path("weights.csv"), t);
  }

  // Effect estimates in absolute-percent and relative (theta) scales.
  const EffectTable effects =
      absolute_change(draws, data, config.outcome_columns);
  {
    CsvTable t;
    t.header = {"scale",       "category",    "estimate",
                "cri95_lower", "cri95_upper", "cri80_lower",
                "cri80_upper", "ess",         "rhat"};
    for (const auto& s : effects.absolute_pct)
      t.rows.push_back({"absolute_pct", s.name, format_g17(s.mean),
                        format_g17(s.cri95_lower), format_g17(s.cri95_upper),
                        format_g17(s.cri80_lower), format_g17(s.cri80_upper),
                        format_g17(s.ess), format_g17(s.rhat)});
    for (const auto& s : effects.relative_theta)
      t.rows.push_back({"relative_theta", s.name, format_g17(s.mean),
                        format_g17(s.cri95_lower), format_g17(s.cri95_upper),
                        format_g17(s.cri80_lower), format_g17(s.cri80_upper),
                        format_g17(s.ess), format_g17(s.rhat)});
    write_csv(path("effects.csv"), t);
  }

  // Trace series for the absolute percent changes and the weights, plus
  // their autocorrelation series (plot data; rendering is out of scope).
  {
    CsvTable t;
    t.header = {"chain", "iteration"};
    for (const auto& n : config.outcome_columns) t.header.push_back("abs_pct_" + n);
    for (const auto& n : config.exposure_columns) t.header.push_back("w_" + n);
    const std::size_t w0 = (draws.dims.K - 1) * (1 + draws.dims.J);
    for (std::size_t c = 0; c < draws.n_chains(); ++c) {
      const Matrix& ratios = effects.ratio_draws[c];
      for (std::size_t it = 0; it < ratios.rows(); ++it) {
        std::vector<std::string> row{std::to_string(c + 1),
                                     std::to_string(it + 1)};
        for (std::size_t k = 0; k < draws.dims.K; ++k)
          row.push_back(format_g17((ratios(it, k) - 1.0) * 100.0));
        for (std::size_t m = 0; m < draws.dims.M; ++m)
          row.push_back(format_g17(draws.constrained[c](it, w0 + m)));
        t.rows.push_back(std::move(row));
      }
    }
    write_csv(path("trace.csv"), t);
  }
  {
    CsvTable t;
    t.header = {"series", "chain", "lag", "autocorrelation"};
    const int max_lag =
        std::min<int>(100, static_cast<int>(draws.n_kept()) / 2);
    const std::size_t w0 = (draws.dims.K - 1) * (1 + draws.dims.J);
    auto emit = [&](const std::string& series, std::size_t chain,
                    const std::vector<double>& x) {
      const auto rho = autocorrelation(x, max_lag);
      for (int l = 0; l <= max_lag; ++l)
        t.rows.push_back({series, std::to_string(chain + 1),
                          std::to_string(l), format_g17(rho[l])});
    };
    for (std::size_t c = 0; c < draws.n_chains(); ++c) {
      const Matrix& ratios = effects.ratio_draws[c];
      for (std::size_t k = 0; k < draws.dims.K; ++k) {
        std::vector<double> x(ratios.rows());
        for (std::size_t it = 0; it < ratios.rows(); ++it)
          x[it] = (ratios(it, k) - 1.0) * 100.0;
        emit("abs_pct_" + config.outcome_columns[k], c, x);
      }
      for (std::size_t m = 0; m < draws.dims.M; ++m)
        emit("w_" + config.exposure_columns[m], c,
             draws.chain_column(c, w0 + m));
    }
    write_csv(path("acf.csv"), t);
  }

  if (config.write_draws) {
    CsvTable t;
    t.header = {"chain", "iteration"};
    for (const auto& n : draws.names) t.header.push_back(n);
    for (std::size_t c = 0; c < draws.n_chains(); ++c) {
      const Matrix& m = draws.constrained[c];
      for (std::size_t it = 0; it < m.rows(); ++it) {
        std::vector<std::string> row{std::to_string(c + 1),
                                     std::to_string(it + 1)};
        for (std::size_t p = 0; p < m.cols(); ++p)
          row.push_back(format_g17(m(it, p)));
        t.rows.push_back(std::move(row));
      }
    }
    write_csv(path("draws.csv"), t);
  }
}

void write_manifest(const RunConfig& config, const std::string& command) {
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["kernel_backend"] = kern::active().name;
  m["priors"] = {{"sigma_beta", config.priors.sigma_beta},
                 {"sigma_theta", config.priors.sigma_theta},
                 {"a_phi", config.priors.a_phi},
                 {"b_phi", config.priors.b_phi},
                 {"a_pi", config.priors.a_pi},
                 {"b_pi", config.priors.b_pi}};
  m["sampler"] = {{"n_chains", config.sampler.n_chains},
                  {"n_iter", config.sampler.n_iter},
                  {"n_warmup", config.sampler.n_warmup},
                  {"target_accept", config.sampler.target_accept},
                  {"max_tree_depth", config.sampler.max_tree_depth},
                  {"seed", config.sampler.seed},
                  {"adapt_mass_matrix", config.sampler.adapt_mass_matrix}};
  if (config.command == Command::kFit) {
    m["input"] = config.input;
    m["n_quantiles"] = config.n_quantiles;
    m["zero_policy"] = zero_policy_text(config);
    m["rank_normalized_rhat"] = config.rank_normalized_rhat;
    m["outcome_columns"] = config.outcome_columns;
    m["exposure_columns"] = config.exposure_columns;
    m["covariate_columns"] = config.covariate_columns;
  }
  json scenarios = json::array();
  auto scenario_json = [](const ScenarioSpec& s) {
    return json{{"n", s.n},     {"K", s.K},       {"M", s.M},
                {"J", s.J},     {"phi", s.phi},   {"rho", s.rho},
                {"reps", s.reps}, {"seed", s.seed}};
  };
  for (const auto& s : config.grid) scenarios.push_back(scenario_json(s));
  if (config.compare_scenario)
    scenarios.push_back(scenario_json(*config.compare_scenario));
  if (!scenarios.empty()) m["scenarios"] = scenarios;

  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  std::ofstream out((fs::path(config.out_dir) / "manifest.json").string());
  out << m.dump(2) << '\n';
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const InferenceError& e) {
    std::cerr << "inference error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int cmd_fit(const RunConfig& config) {
  return run_guarded([&] {
    const CsvTable table = read_csv(config.input);
    Matrix y = extract_columns(table, config.outcome_columns);
    const Matrix exposures = extract_columns(table, config.exposure_columns);
    const Matrix x = extract_columns(table, config.covariate_columns);

    apply_zero_policy(y, config.zero_policy, config.zero_epsilon);
    normalize_outcome_rows(y);

    QuantileScorer scorer;
    QuantileMatrix q;
    try {
      scorer = fit_quantile_scorer(exposures, config.n_quantiles,
                                   config.exposure_columns);
      q = score(scorer, exposures);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }

    DbwqsData data = [&] {
      try {
        return DbwqsData::create(std::move(y), std::move(q), x);
      } catch (const std::exception& e) {
        throw ConfigError(e.what());
      }
    }();

    const PosteriorDraws draws = run_chains(data, config.priors, config.sampler);
    write_fit_outputs(config, draws, data);
    write_manifest(config, "fit");
  });
}

int cmd_simulate(const RunConfig& config) {
  return run_guarded([&] {
    if (config.grid.empty()) throw ConfigError("simulate needs a scenario grid");
    // The manifest (scenario enumeration and seeds) is written before any
    // fitting starts.
    write_manifest(config, "simulate");
    const StudyMetrics metrics =
        run_study(config.grid, config.sampler, config.priors, config.threads);

    CsvTable t;
    t.header = {"n",     "K",          "M",        "J",
                "phi",   "rho",        "reps",     "seed",
                "parameter", "truth",  "mc_mean",  "bias",
                "rmse",  "mae",        "mean_sd",  "coverage95",
                "max_rhat", "min_ess", "n_reps_used", "n_failed"};
    for (const auto& sm : metrics.scenarios) {
      for (const auto& row : sm.rows) {
        t.rows.push_back(
            {std::to_string(sm.spec.n), std::to_string(sm.spec.K),
             std::to_string(sm.spec.M), std::to_string(sm.spec.J),
             format_g17(sm.spec.phi), format_g17(sm.spec.rho),
             std::to_string(sm.spec.reps), std::to_string(sm.spec.seed),
             row.parameter, format_g17(row.truth), format_g17(row.mc_mean),
             format_g17(row.bias), format_g17(row.rmse), format_g17(row.mae),
             format_g17(row.mean_sd), format_g17(row.coverage95),
             format_g17(row.max_rhat), format_g17(row.min_ess),
             std::to_string(row.n_reps_used), std::to_string(row.n_failed)});
      }
    }
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    write_csv((fs::path(config.out_dir) / "metrics.csv").string(), t);
  });
}

int cmd_compare(const RunConfig& config) {
  return run_guarded([&] {
    if (!config.compare_scenario)
      throw ConfigError("compare needs a scenario block");
    write_manifest(config, "compare");
    const CompareResult res = compare_joint_individual(
        *config.compare_scenario, config.sampler, config.priors,
        config.threads);

    CsvTable t;
    t.header = {"n",          "K",         "M",
                "J",          "phi",       "rho",
                "category",   "truth",     "joint_bias",
                "joint_rmse", "joint_coverage95", "individual_bias",
                "individual_rmse", "individual_coverage95", "n_reps_used"};
    for (const auto& row : res.rows) {
      const auto& s = res.spec;
      t.rows.push_back(
          {std::to_string(s.n), std::to_string(s.K), std::to_string(s.M),
           std::to_string(s.J), format_g17(s.phi), format_g17(s.rho),
           std::to_string(row.category), format_g17(row.truth),
           format_g17(row.joint_bias), format_g17(row.joint_rmse),
           format_g17(row.joint_coverage95), format_g17(row.individual_bias),
           format_g17(row.individual_rmse),
           format_g17(row.individual_coverage95),
           std::to_string(row.n_reps_used)});
    }
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    write_csv((fs::path(config.out_dir) / "compare.csv").string(), t);
  });
}

}  // namespace dbwqs
