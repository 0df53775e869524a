#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbwqs/model.hpp"
#include "dbwqs/sampler.hpp"
#include "dbwqs/simulation.hpp"

namespace dbwqs {

inline constexpr const char* kVersion = "0.1.0";

enum class Command { kFit, kSimulate, kCompare };

// Run configuration shared by the CLI subcommands; loaded from a JSON file
// whose keys mirror these field names (see README for the schema).
struct RunConfig {
  Command command = Command::kFit;

  // fit
  std::string input;
  std::vector<std::string> outcome_columns;
  std::vector<std::string> exposure_columns;
  std::vector<std::string> covariate_columns;
  int n_quantiles = 4;
  ZeroPolicy zero_policy = ZeroPolicy::kReject;
  double zero_epsilon = 1e-6;
  bool write_draws = false;
  // Report rank-normalized split R-hat instead of the classic statistic.
  bool rank_normalized_rhat = false;

  // simulate / compare
  std::vector<ScenarioSpec> grid;
  std::optional<ScenarioSpec> compare_scenario;

  PriorConfig priors;
  SamplerConfig sampler;
  std::string out_dir = ".";
  int threads = 0;
};

// Parses and validates the JSON config for the given command; throws
// ConfigError with a descriptive message.
RunConfig load_run_config(const std::string& path, Command command);

// Optional command-line overrides applied after loading.
void apply_overrides(RunConfig& config, std::optional<std::uint64_t> seed,
                     std::optional<std::string> out_dir,
                     std::optional<std::string> zero_policy);

// Subcommand drivers.  Return the process exit code: 0 success, 2 on input or
// configuration errors, 3 on inference failure.
int cmd_fit(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_compare(const RunConfig& config);

}  // namespace dbwqs
