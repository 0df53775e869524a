#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dbwqs/errors.hpp"
#include "dbwqs/runner.hpp"

// dbwqs fit|simulate|compare --config <path> [--seed N] [--out DIR]
//                            [--zero-policy reject|replace:EPS]
//
// Exit codes: 0 success, 2 input/config error, 3 inference failure.

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet Bayesian weighted quantile sum regression"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> zero_policy;
  };

  auto add_common = [](CLI::App* cmd, Args& args) {
    cmd->add_option("--config", args.config, "JSON run configuration")
        ->required();
    cmd->add_option("--seed", args.seed, "override the configured seed");
    cmd->add_option("--out", args.out, "override the output directory");
  };

  Args fit_args, sim_args, cmp_args;
  CLI::App* fit = app.add_subcommand("fit", "fit a dataset from CSV");
  add_common(fit, fit_args);
  fit->add_option("--zero-policy", fit_args.zero_policy,
                  "outcome zeros: 'reject' or 'replace:EPS'");
  CLI::App* sim = app.add_subcommand("simulate", "run a simulation study");
  add_common(sim, sim_args);
  CLI::App* cmp =
      app.add_subcommand("compare", "joint vs individual outcome comparison");
  add_common(cmp, cmp_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const auto run = [](dbwqs::Command command, const Args& args) {
    try {
      dbwqs::RunConfig config = dbwqs::load_run_config(args.config, command);
      dbwqs::apply_overrides(config, args.seed, args.out, args.zero_policy);
      switch (command) {
        case dbwqs::Command::kFit: return dbwqs::cmd_fit(config);
        case dbwqs::Command::kSimulate: return dbwqs::cmd_simulate(config);
        case dbwqs::Command::kCompare: return dbwqs::cmd_compare(config);
      }
      return 2;
    } catch (const dbwqs::ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  };

  if (fit->parsed()) return run(dbwqs::Command::kFit, fit_args);
  if (sim->parsed()) return run(dbwqs::Command::kSimulate, sim_args);
  return run(dbwqs::Command::kCompare, cmp_args);
}
