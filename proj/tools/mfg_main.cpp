// Command line front end: classify a game, run a fixed-point iteration,
// verify a candidate equilibrium, or sweep the population size. Exit codes
// are a stable contract: 0 converged, 2 stagnated or iteration budget
// exhausted, 3 config error, 4 numerical failure.

#include "mfg/mfg.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct GlobalArgs
{
  std::string config_path;
  std::string out_dir = ".";
  std::string iteration;
  bool force = false;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

void add_common_flags(CLI::App& cmd, GlobalArgs& args)
{
  cmd.add_option("--config", args.config_path, "Scenario config (JSON)")->required();
  cmd.add_option("--out", args.out_dir, "Output directory for artifacts");
  cmd.add_option("--threads", args.threads, "Worker threads for agent subproblems");
  cmd.add_option("--seed", args.seed, "Override the config seed");
}

void add_run_flags(CLI::App& cmd, GlobalArgs& args)
{
  cmd.add_option("--iteration", args.iteration, "Fixed-point scheme")
      ->check(CLI::IsMember({"picard", "krasnoselskij", "mann", "ishikawa"}));
  cmd.add_flag("--force", args.force, "Run a scheme without a convergence certificate");
}

mfg::ScenarioConfig load_with_overrides(const GlobalArgs& args)
{
  mfg::ScenarioConfig cfg = mfg::load_config(args.config_path);
  if (!args.iteration.empty()) {
    cfg.iteration.kind = *mfg::iteration_kind_from_string(args.iteration);
    cfg.iteration_auto = false;
  }
  if (args.threads) {
    if (*args.threads < 1) { throw mfg::ConfigError({"--threads: must be at least 1"}); }
    cfg.iteration.threads = *args.threads;
  }
  if (args.seed) { cfg.seed = *args.seed; }
  return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Mean-field equilibrium solver for constrained quadratic games"};
  app.require_subcommand(1);

  GlobalArgs args;
  std::string z_path;

  CLI::App* classify = app.add_subcommand("classify", "Classify the aggregation mapping");
  add_common_flags(*classify, args);

  CLI::App* run = app.add_subcommand("run", "Iterate to a fixed point and certify it");
  add_common_flags(*run, args);
  add_run_flags(*run, args);

  CLI::App* verify = app.add_subcommand("verify-nash", "Certify a candidate equilibrium");
  add_common_flags(*verify, args);
  verify->add_option("--z", z_path, "Candidate: JSON array or any artifact with a z_bar field")
      ->required();

  CLI::App* sweep = app.add_subcommand("sweep", "Re-run over a list of population sizes");
  add_common_flags(*sweep, args);
  add_run_flags(*sweep, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mfg::kExitConfigError;
  }

  try {
    const mfg::ScenarioConfig cfg = load_with_overrides(args);
    mfg::CommandContext ctx;
    ctx.out_dir = args.out_dir;
    ctx.force = args.force;
    ctx.diag = &std::cerr;

    if (classify->parsed()) { return mfg::classify_command(cfg, ctx); }
    if (run->parsed()) { return mfg::run_command(cfg, ctx); }
    if (verify->parsed()) { return mfg::verify_command(cfg, mfg::read_z_bar_file(z_path), ctx); }
    if (sweep->parsed()) { return mfg::sweep_command(cfg, ctx); }
    std::cerr << "no subcommand\n";
    return mfg::kExitConfigError;
  } catch (const mfg::ConfigError& e) {
    for (const std::string& item : e.violations()) { std::cerr << "config error: " << item << '\n'; }
    return mfg::kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return mfg::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mfg::kExitNumericalFailure;
  }
}
