#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "formflight/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Formation flight planner and swarm simulator"};

  std::string mode = "single";
  std::string scenario_path;
  std::string swarm_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;

  app.add_option("--mode", mode, "single | sweep | oracle-check")
      ->check(CLI::IsMember({"single", "sweep", "oracle-check"}));
  app.add_option("--scenario", scenario_path, "Scenario config file")->check(CLI::ExistingFile);
  app.add_option("--swarm", swarm_path, "Swarm config file")->check(CLI::ExistingFile);
  app.add_option("--seed,--seeds", seeds, "Episode seed(s); override the scenario seed");
  app.add_option("--out", out_dir, "Directory for traces, reports and the sweep summary");

  CLI11_PARSE(app, argc, argv);

  formflight::RunManifest manifest;
  manifest.mode = mode == "sweep"          ? formflight::RunMode::Sweep
                  : mode == "oracle-check" ? formflight::RunMode::OracleCheck
                                           : formflight::RunMode::Single;
  manifest.scenario_path = scenario_path;
  manifest.swarm_path = swarm_path;
  manifest.seeds = seeds;
  manifest.out_dir = out_dir;

  try {
    return formflight::run_manifest(manifest, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
