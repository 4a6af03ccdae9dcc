// cosserat-af <material-point|solve|sweep-nu|verify-energy> --config <path> [--out <dir>] [--seed <n>]

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cosaf/cli_io.hpp"
#include "cosaf/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Armstrong-Frederick plasticity with Cosserat effects (Yosida scheme)"};
  app.require_subcommand(1);
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  for (const char* name : {"material-point", "solve", "sweep-nu", "verify-energy"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON scenario file")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "seed for random probes (overrides the config)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cosaf::exit_config;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  cosaf::ScenarioConfig cfg;
  try {
    cfg = cosaf::parse_config(config);
    if (seed) cosaf::set_seed(cfg, *seed);
  } catch (const cosaf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cosaf::exit_config;
  }
  return cosaf::run_subcommand(cmd, cfg, out, std::cerr);
}
