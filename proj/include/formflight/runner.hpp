#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "formflight/swarm_sim.hpp"
#include "formflight/world.hpp"

namespace formflight {

enum class RunMode { Single, Sweep, OracleCheck };

// What the CLI asks for. Seeds override both the scenario seed and the swarm
// master seed so one number reproduces a whole episode. Empty paths mean the
// built-in defaults; an empty out_dir writes nothing and prints instead.
struct RunManifest {
  RunMode mode = RunMode::Single;
  std::string scenario_path;
  std::string swarm_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
};

struct OracleOutcomes {
  bool edt = false;
  bool auction = false;
  bool front_cost = false;
  bool running_cost = false;
  bool all() const { return edt && auction && front_cost && running_cost; }
};

OracleOutcomes run_oracle_suites(std::ostream& log);

// Returns the process exit code: 0 all episodes succeeded (or all oracle
// suites passed), 1 otherwise. Throws on unusable input.
int run_manifest(const RunManifest& manifest, std::ostream& out);

// One line per episode plus aggregate counts; stable across reruns.
std::string summarize_sweep(const std::vector<std::uint64_t>& seeds,
                            const std::vector<EpisodeReport>& reports);

}  // namespace formflight
