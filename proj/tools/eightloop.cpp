// Command-line front end: runs one scenario document.
//
//   eightloop --config scenario.json [--seed N] [--out DIR] [--threads N] [--constants FILE]
//
// Exit status: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "eightloop/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Limit-cycle laboratory for the perturbed figure-eight loop"};
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int threads = 1;
  std::optional<std::string> constants;
  app.add_option("--config", config, "Scenario JSON document")->required();
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--out", out, "Override the output directory");
  app.add_option("--threads", threads, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_option("--constants", constants, "Fitted-constants JSON (from series-fit)");
  app.set_version_flag("--version", std::string(eightloop::kToolVersion));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : eightloop::kExitConfig;
  }

  eightloop::Scenario scenario;
  try {
    scenario = eightloop::load_scenario(config);
  } catch (const eightloop::Error& e) {
    std::cerr << "eightloop: " << e.what() << '\n';
    return eightloop::kExitConfig;
  }
  if (seed) scenario.seed = *seed;
  if (out) scenario.output_dir = *out;

  eightloop::RunOptions options;
  options.threads = threads;
  if (constants) options.constants = *constants;

  const eightloop::RunResult result = eightloop::run(scenario, options);
  if (result.exit_code != eightloop::kExitOk) {
    std::cerr << "eightloop: " << result.message << '\n';
  } else {
    std::cout << scenario.command << ": wrote " << result.manifest.outputs.size() << " files to "
              << scenario.output_dir << " (scenario " << result.manifest.scenario_hash << ")\n";
  }
  return result.exit_code;
}
