#pragma once

#include <stdexcept>
#include <string>

#include "formflight/swarm_sim.hpp"
#include "formflight/world.hpp"

namespace formflight {

// Plain `key = value` config files. '#' starts a comment, blank lines are
// skipped, keys use dotted groups (front.*, mppi.*, cost.*, sfc.*). Unknown
// or duplicate keys are hard errors that name the file and line. Every field
// has a default, so an empty file parses to the stock configuration.

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& source, int line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what) {}
};

ScenarioSpec parse_scenario(const std::string& text, const std::string& source_name = "<string>");
SwarmConfig parse_swarm(const std::string& text, const std::string& source_name = "<string>");

ScenarioSpec load_scenario_file(const std::string& path);
SwarmConfig load_swarm_file(const std::string& path);

std::string serialize_scenario(const ScenarioSpec& spec);
std::string serialize_swarm(const SwarmConfig& config);

}  // namespace formflight
