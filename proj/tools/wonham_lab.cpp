#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wonham/error.hpp"
#include "wonham/harness.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned threads = 1;
  bool quiet = false;
};

void add_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "experiment config file")->required();
  cmd->add_option("--seed", flags.seed, "master seed (overrides the config)");
  cmd->add_option("--out", flags.out, "output directory (overrides the config)");
  cmd->add_option("--threads", flags.threads, "worker threads for Monte Carlo trials")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", flags.quiet, "suppress the summary on stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wonham filter stability lab"};
  app.require_subcommand(1);
  Flags flags;
  std::optional<wonham::ExperimentKind> chosen;

  auto* run_cmd = app.add_subcommand("run", "run the experiment named by the config's kind");
  add_flags(run_cmd, flags);
  for (wonham::ExperimentKind kind : wonham::all_kinds()) {
    auto* cmd = app.add_subcommand(std::string(wonham::to_string(kind)),
                                   "run the " + std::string(wonham::to_string(kind)) + " experiment");
    add_flags(cmd, flags);
    cmd->callback([&chosen, kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  wonham::ExperimentConfig config;
  try {
    config = wonham::load_config(flags.config);
  } catch (const wonham::Error& e) {
    const std::string out_dir = flags.out ? *flags.out : "out";
    wonham::write_failure_manifest(out_dir, "ConfigInvalid", e.what());
    std::cerr << "error [ConfigInvalid]: " << e.what() << '\n';
    return wonham::kExitConfigInvalid;
  }

  wonham::RunOptions options;
  options.kind = chosen;
  options.seed = flags.seed;
  options.out_dir = flags.out;
  options.threads = flags.threads;
  options.quiet = flags.quiet;

  const wonham::RunResult result = wonham::run(config, options);
  if (result.exit_code != wonham::kExitOk) {
    std::cerr << "error [" << result.error_category << "]: " << result.error_message << '\n';
  }
  if (!flags.quiet) std::cout << result.summary;
  return result.exit_code;
}
