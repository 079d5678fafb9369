//! Command-line front end: reads a run configuration, applies command
//! line overrides and dispatches to the orchestrator.
//!
//!   hjlab_cli <subcommand> [--config FILE] [--set key=value]... [--seed N]
//!             [--workers N] [--out DIR]
//!   hjlab_cli run --config FILE [...]
//!   hjlab_cli schema
//!
//! Exit status: 0 success, 2 when an acceptance check failed, 1 on error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjlab/config.hpp"
#include "hjlab/run.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
};

void AddRunOptions(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_path, "run configuration file (key = value lines)");
  cmd->add_option("--set", o.overrides, "override one key, e.g. --set grid.dx=0.25");
  cmd->add_option("--seed", o.seed, "master seed (mc.seed)");
  cmd->add_option("--workers", o.workers, "worker threads (mc.workers)");
  cmd->add_option("-o,--out", o.out, "artifact directory (output.dir)");
}

hjlab::RunConfig BuildConfig(std::string const& subcommand, Options const& o) {
  auto cfg = hjlab::RunConfig();
  if (!o.config_path.empty()) {
    auto const text = hjlab::ReadFileBytes(o.config_path);
    cfg = hjlab::ParseConfig(text, o.config_path);
  } else if (subcommand == "run") {
    throw hjlab::ConfigError("run needs --config");
  }
  if (subcommand != "run") {
    if (!cfg.subcommand.empty() && cfg.subcommand != subcommand) {
      throw hjlab::ConfigError(hjlab::Msg(o.config_path, ", field 'subcommand': file selects '",
                                          cfg.subcommand, "' but the command line selects '",
                                          subcommand, "'"));
    }
    cfg.subcommand = subcommand;
  } else if (cfg.subcommand.empty()) {
    throw hjlab::ConfigError(hjlab::Msg(o.config_path, ": missing key 'subcommand'"));
  }
  for (auto const& s : o.overrides) hjlab::ApplyOverride(cfg, s);
  if (o.seed) hjlab::SetConfigValue(cfg, "mc.seed", std::to_string(*o.seed), "--seed");
  if (o.workers) hjlab::SetConfigValue(cfg, "mc.workers", std::to_string(*o.workers), "--workers");
  if (o.out) hjlab::SetConfigValue(cfg, "output.dir", *o.out, "--out");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  auto app = CLI::App("Numerical laboratory for Hamilton-Jacobi equations in random environments");
  app.require_subcommand(1, 1);
  auto opts = Options();
  auto commands = hjlab::Subcommands();
  commands.push_back("run");
  for (auto const& name : commands) {
    auto* cmd = app.add_subcommand(name, name == "run" ? "run the subcommand named in --config"
                                                       : "run " + name);
    AddRunOptions(cmd, opts);
  }
  app.add_subcommand("schema", "print every configuration key with its default");

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  auto const* chosen = app.get_subcommands().front();
  if (chosen->get_name() == "schema") {
    std::cout << hjlab::DescribeSchema();
    return 0;
  }
  try {
    auto const cfg = BuildConfig(chosen->get_name(), opts);
    auto const out = hjlab::ResolveOutputDir(cfg, std::getenv(hjlab::kOutputRootVar));
    return hjlab::ExitStatus(hjlab::Run(cfg, out, std::cout));
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
