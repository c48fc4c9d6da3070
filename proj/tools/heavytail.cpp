#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "heavytail/cli.hpp"

int main(int argc, char** argv) {
  namespace cli = heavytail::cli;
  CLI::App app{"heavytail: heavy-tailed risk aggregation experiments"};
  app.set_version_flag("--version", HEAVYTAIL_VERSION);

  cli::Options opt;
  std::string subcommands;
  for (auto s : cli::kSubcommands) subcommands += (subcommands.empty() ? "" : ", ") + std::string(s);
  app.add_option("subcommand", opt.subcommand, "One of: " + subcommands)->required();
  app.add_option("--config", opt.config_path, "Experiment config (key = value)")->required();
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Master seed; overrides the config and HEAVYTAIL_SEED");
  std::optional<std::string> out;
  app.add_option("--out", out, "Output directory (default: output.dir or heavytail-out)");
  app.add_flag("--assert", opt.assert_verdicts, "Exit 3 when any verdict is inconclusive");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitUsage;
  }
  opt.seed = seed;
  opt.out_dir = out;
  return cli::dispatch(opt, std::cerr);
}
