#include "formflight/config_io.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "formflight/textio.hpp"

namespace formflight {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& v, const std::string& src, int line) {
  std::istringstream in(v);
  double x;
  if (!(in >> x) || !(in >> std::ws).eof()) throw ConfigError(src, line, "expected a number: '" + v + "'");
  return x;
}

long long to_int(const std::string& v, const std::string& src, int line) {
  std::istringstream in(v);
  long long x;
  if (!(in >> x) || !(in >> std::ws).eof()) throw ConfigError(src, line, "expected an integer: '" + v + "'");
  return x;
}

std::uint64_t to_u64(const std::string& v, const std::string& src, int line) {
  std::istringstream in(v);
  std::uint64_t x;
  if (!v.empty() && v[0] == '-') throw ConfigError(src, line, "expected a non-negative integer: '" + v + "'");
  if (!(in >> x) || !(in >> std::ws).eof())
    throw ConfigError(src, line, "expected a non-negative integer: '" + v + "'");
  return x;
}

Eigen::Vector3d to_vec3(const std::string& v, const std::string& src, int line) {
  std::istringstream in(v);
  Eigen::Vector3d x;
  if (!(in >> x.x() >> x.y() >> x.z()) || !(in >> std::ws).eof())
    throw ConfigError(src, line, "expected three numbers: '" + v + "'");
  return x;
}

std::vector<Eigen::Vector3d> to_shape(const std::string& v, const std::string& src, int line) {
  std::vector<Eigen::Vector3d> out;
  std::size_t begin = 0;
  while (begin <= v.size()) {
    std::size_t end = v.find(';', begin);
    std::string part = trim(end == std::string::npos ? v.substr(begin) : v.substr(begin, end - begin));
    if (!part.empty()) out.push_back(to_vec3(part, src, line));
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  if (out.empty()) throw ConfigError(src, line, "shape needs at least one point");
  return out;
}

// Walks `key = value` lines, strips comments, rejects duplicates, and hands
// each pair to the type-specific handler. The handler returns false for keys
// it does not know.
void parse_kv(const std::string& text, const std::string& src,
              const std::function<bool(const std::string&, const std::string&, int)>& handle) {
  std::istringstream in(text);
  std::string raw;
  std::set<std::string> seen;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::size_t hash = raw.find('#');
    std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    std::size_t eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(src, line, "expected 'key = value'");
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ConfigError(src, line, "empty key");
    if (!seen.insert(key).second) throw ConfigError(src, line, "duplicate key '" + key + "'");
    if (!handle(key, value, line)) throw ConfigError(src, line, "unknown key '" + key + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string vec3_str(const Eigen::Vector3d& v) {
  return g17(v.x()) + " " + g17(v.y()) + " " + g17(v.z());
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& text, const std::string& src) {
  ScenarioSpec spec;
  parse_kv(text, src, [&](const std::string& key, const std::string& v, int line) {
    if (key == "kind") {
      if (v == "pillars") spec.kind = ScenarioKind::PillarField;
      else if (v == "corridor") spec.kind = ScenarioKind::Corridor;
      else throw ConfigError(src, line, "kind must be 'pillars' or 'corridor'");
    } else if (key == "extent") spec.extent = to_vec3(v, src, line);
    else if (key == "resolution") spec.resolution = to_double(v, src, line);
    else if (key == "obstacle_count") spec.obstacle_count = static_cast<int>(to_int(v, src, line));
    else if (key == "pillar_radius_min") spec.pillar_radius_min = to_double(v, src, line);
    else if (key == "pillar_radius_max") spec.pillar_radius_max = to_double(v, src, line);
    else if (key == "corridor_width") spec.corridor_width = to_double(v, src, line);
    else if (key == "clearance_radius") spec.clearance_radius = to_double(v, src, line);
    else if (key == "seed") spec.seed = to_u64(v, src, line);
    else if (key == "start") spec.start = to_vec3(v, src, line);
    else if (key == "goal") spec.goal = to_vec3(v, src, line);
    else return false;
    return true;
  });
  return spec;
}

SwarmConfig parse_swarm(const std::string& text, const std::string& src) {
  SwarmConfig cfg;
  std::string preset;
  int preset_line = 0;
  double circumradius = 2.4;
  bool circ_seen = false, shape_seen = false;
  int circ_line = 0;

  parse_kv(text, src, [&](const std::string& key, const std::string& v, int line) {
    if (key == "n_uavs") cfg.n_uavs = static_cast<int>(to_int(v, src, line));
    else if (key == "shape") { cfg.shape = to_shape(v, src, line); shape_seen = true; }
    else if (key == "shape_preset") { preset = v; preset_line = line; }
    else if (key == "shape_circumradius") { circumradius = to_double(v, src, line); circ_seen = true; circ_line = line; }
    else if (key == "s_des") cfg.s_des = to_double(v, src, line);
    else if (key == "uav_radius") cfg.uav_radius = to_double(v, src, line);
    else if (key == "goal_tolerance") cfg.goal_tolerance = to_double(v, src, line);
    else if (key == "distortion_limit") cfg.distortion_limit = to_double(v, src, line);
    else if (key == "replan_period") cfg.replan_period = to_double(v, src, line);
    else if (key == "episode_timeout") cfg.episode_timeout = to_double(v, src, line);
    else if (key == "master_seed") cfg.master_seed = to_u64(v, src, line);
    else if (key == "assign_epsilon") cfg.assign_epsilon = to_double(v, src, line);
    else if (key == "d_cap") cfg.d_cap = to_double(v, src, line);
    else if (key == "front.r_min") cfg.front.r_min = to_double(v, src, line);
    else if (key == "front.gamma_max") cfg.front.gamma_max = to_double(v, src, line);
    else if (key == "front.s_min") cfg.front.s_min = to_double(v, src, line);
    else if (key == "front.s_max") cfg.front.s_max = to_double(v, src, line);
    else if (key == "front.scale_samples") cfg.front.scale_samples = static_cast<int>(to_int(v, src, line));
    else if (key == "front.num_sequences") cfg.front.num_sequences = static_cast<int>(to_int(v, src, line));
    else if (key == "front.steps_per_sequence") cfg.front.steps_per_sequence = static_cast<int>(to_int(v, src, line));
    else if (key == "front.direction_jitter") cfg.front.direction_jitter = to_double(v, src, line);
    else if (key == "front.seed") cfg.front.seed = to_u64(v, src, line);
    else if (key == "weights.k_g") cfg.front_weights.k_g = to_double(v, src, line);
    else if (key == "weights.k_s") cfg.front_weights.k_s = to_double(v, src, line);
    else if (key == "weights.k_safe") cfg.front_weights.k_safe = to_double(v, src, line);
    else if (key == "weights.k_sc") cfg.front_weights.k_sc = to_double(v, src, line);
    else if (key == "weights.k_ac") cfg.front_weights.k_ac = to_double(v, src, line);
    else if (key == "weights.d_risk") cfg.front_weights.d_risk = to_double(v, src, line);
    else if (key == "weights.suspend_penalty_per_step")
      cfg.front_weights.suspend_penalty_per_step = to_double(v, src, line);
    else if (key == "mppi.rollouts") cfg.mppi.rollouts = static_cast<int>(to_int(v, src, line));
    else if (key == "mppi.horizon") cfg.mppi.horizon = static_cast<int>(to_int(v, src, line));
    else if (key == "mppi.dt") cfg.mppi.dt = to_double(v, src, line);
    else if (key == "mppi.lambda") cfg.mppi.lambda = to_double(v, src, line);
    else if (key == "mppi.noise_diag") {
      std::istringstream in(v);
      Eigen::Vector4d d;
      if (!(in >> d(0) >> d(1) >> d(2) >> d(3)) || !(in >> std::ws).eof())
        throw ConfigError(src, line, "expected four numbers: '" + v + "'");
      cfg.mppi.sigma = d.asDiagonal();
    } else if (key == "mppi.seed") cfg.mppi.seed = to_u64(v, src, line);
    else if (key == "cost.k_f") cfg.cost.k_f = to_double(v, src, line);
    else if (key == "cost.k_dyn") cfg.cost.k_dyn = to_double(v, src, line);
    else if (key == "cost.v_max") cfg.cost.v_max = to_double(v, src, line);
    else if (key == "cost.a_max") cfg.cost.a_max = to_double(v, src, line);
    else if (key == "cost.k_smo") cfg.cost.k_smo = to_double(v, src, line);
    else if (key == "cost.k_obs") cfg.cost.k_obs = to_double(v, src, line);
    else if (key == "cost.beta") cfg.cost.beta = to_double(v, src, line);
    else if (key == "cost.d_obs_min") cfg.cost.d_obs_min = to_double(v, src, line);
    else if (key == "cost.d_obs_max") cfg.cost.d_obs_max = to_double(v, src, line);
    else if (key == "cost.k_mut") cfg.cost.k_mut = to_double(v, src, line);
    else if (key == "cost.alpha") cfg.cost.alpha = to_double(v, src, line);
    else if (key == "cost.d_mut_min") cfg.cost.d_mut_min = to_double(v, src, line);
    else if (key == "cost.d_mut_max") cfg.cost.d_mut_max = to_double(v, src, line);
    else if (key == "cost.downwash_lambda") cfg.cost.downwash_lambda = to_double(v, src, line);
    else if (key == "sfc.sensing_half_extent") cfg.sfc.sensing_half_extent = to_double(v, src, line);
    else if (key == "sfc.safety_margin") cfg.sfc.safety_margin = to_double(v, src, line);
    else if (key == "sfc.face_budget") cfg.sfc.face_budget = static_cast<int>(to_int(v, src, line));
    else if (key == "sfc.min_half_extent") cfg.sfc.min_half_extent = to_double(v, src, line);
    else return false;
    return true;
  });

  if (!preset.empty() && shape_seen)
    throw ConfigError(src, preset_line, "give either shape or shape_preset, not both");
  if (circ_seen && preset.empty())
    throw ConfigError(src, circ_line, "shape_circumradius needs shape_preset");
  if (!preset.empty()) {
    if (preset != "triangle6") throw ConfigError(src, preset_line, "unknown shape_preset '" + preset + "'");
    cfg.shape = triangle6_shape(circumradius);
  }
  cfg.front_weights.s_des = cfg.s_des;
  return cfg;
}

ScenarioSpec load_scenario_file(const std::string& path) {
  return parse_scenario(read_file(path), path);
}

SwarmConfig load_swarm_file(const std::string& path) {
  return parse_swarm(read_file(path), path);
}

std::string serialize_scenario(const ScenarioSpec& spec) {
  std::string s;
  s += "kind = " + std::string(spec.kind == ScenarioKind::PillarField ? "pillars" : "corridor") + "\n";
  s += "extent = " + vec3_str(spec.extent) + "\n";
  s += "resolution = " + g17(spec.resolution) + "\n";
  s += "obstacle_count = " + std::to_string(spec.obstacle_count) + "\n";
  s += "pillar_radius_min = " + g17(spec.pillar_radius_min) + "\n";
  s += "pillar_radius_max = " + g17(spec.pillar_radius_max) + "\n";
  s += "corridor_width = " + g17(spec.corridor_width) + "\n";
  s += "clearance_radius = " + g17(spec.clearance_radius) + "\n";
  s += "seed = " + std::to_string(spec.seed) + "\n";
  s += "start = " + vec3_str(spec.start) + "\n";
  s += "goal = " + vec3_str(spec.goal) + "\n";
  return s;
}

std::string serialize_swarm(const SwarmConfig& cfg) {
  std::string s;
  s += "n_uavs = " + std::to_string(cfg.n_uavs) + "\n";
  std::string shape;
  for (std::size_t i = 0; i < cfg.shape.size(); ++i) {
    if (i) shape += "; ";
    shape += vec3_str(cfg.shape[i]);
  }
  s += "shape = " + shape + "\n";
  s += "s_des = " + g17(cfg.s_des) + "\n";
  s += "uav_radius = " + g17(cfg.uav_radius) + "\n";
  s += "goal_tolerance = " + g17(cfg.goal_tolerance) + "\n";
  s += "distortion_limit = " + g17(cfg.distortion_limit) + "\n";
  s += "replan_period = " + g17(cfg.replan_period) + "\n";
  s += "episode_timeout = " + g17(cfg.episode_timeout) + "\n";
  s += "master_seed = " + std::to_string(cfg.master_seed) + "\n";
  s += "assign_epsilon = " + g17(cfg.assign_epsilon) + "\n";
  s += "d_cap = " + g17(cfg.d_cap) + "\n";
  s += "front.r_min = " + g17(cfg.front.r_min) + "\n";
  s += "front.gamma_max = " + g17(cfg.front.gamma_max) + "\n";
  s += "front.s_min = " + g17(cfg.front.s_min) + "\n";
  s += "front.s_max = " + g17(cfg.front.s_max) + "\n";
  s += "front.scale_samples = " + std::to_string(cfg.front.scale_samples) + "\n";
  s += "front.num_sequences = " + std::to_string(cfg.front.num_sequences) + "\n";
  s += "front.steps_per_sequence = " + std::to_string(cfg.front.steps_per_sequence) + "\n";
  s += "front.direction_jitter = " + g17(cfg.front.direction_jitter) + "\n";
  s += "front.seed = " + std::to_string(cfg.front.seed) + "\n";
  s += "weights.k_g = " + g17(cfg.front_weights.k_g) + "\n";
  s += "weights.k_s = " + g17(cfg.front_weights.k_s) + "\n";
  s += "weights.k_safe = " + g17(cfg.front_weights.k_safe) + "\n";
  s += "weights.k_sc = " + g17(cfg.front_weights.k_sc) + "\n";
  s += "weights.k_ac = " + g17(cfg.front_weights.k_ac) + "\n";
  s += "weights.d_risk = " + g17(cfg.front_weights.d_risk) + "\n";
  s += "weights.suspend_penalty_per_step = " + g17(cfg.front_weights.suspend_penalty_per_step) + "\n";
  s += "mppi.rollouts = " + std::to_string(cfg.mppi.rollouts) + "\n";
  s += "mppi.horizon = " + std::to_string(cfg.mppi.horizon) + "\n";
  s += "mppi.dt = " + g17(cfg.mppi.dt) + "\n";
  s += "mppi.lambda = " + g17(cfg.mppi.lambda) + "\n";
  s += "mppi.noise_diag = " + g17(cfg.mppi.sigma(0, 0)) + " " + g17(cfg.mppi.sigma(1, 1)) + " " +
       g17(cfg.mppi.sigma(2, 2)) + " " + g17(cfg.mppi.sigma(3, 3)) + "\n";
  s += "mppi.seed = " + std::to_string(cfg.mppi.seed) + "\n";
  s += "cost.k_f = " + g17(cfg.cost.k_f) + "\n";
  s += "cost.k_dyn = " + g17(cfg.cost.k_dyn) + "\n";
  s += "cost.v_max = " + g17(cfg.cost.v_max) + "\n";
  s += "cost.a_max = " + g17(cfg.cost.a_max) + "\n";
  s += "cost.k_smo = " + g17(cfg.cost.k_smo) + "\n";
  s += "cost.k_obs = " + g17(cfg.cost.k_obs) + "\n";
  s += "cost.beta = " + g17(cfg.cost.beta) + "\n";
  s += "cost.d_obs_min = " + g17(cfg.cost.d_obs_min) + "\n";
  s += "cost.d_obs_max = " + g17(cfg.cost.d_obs_max) + "\n";
  s += "cost.k_mut = " + g17(cfg.cost.k_mut) + "\n";
  s += "cost.alpha = " + g17(cfg.cost.alpha) + "\n";
  s += "cost.d_mut_min = " + g17(cfg.cost.d_mut_min) + "\n";
  s += "cost.d_mut_max = " + g17(cfg.cost.d_mut_max) + "\n";
  s += "cost.downwash_lambda = " + g17(cfg.cost.downwash_lambda) + "\n";
  s += "sfc.sensing_half_extent = " + g17(cfg.sfc.sensing_half_extent) + "\n";
  s += "sfc.safety_margin = " + g17(cfg.sfc.safety_margin) + "\n";
  s += "sfc.face_budget = " + std::to_string(cfg.sfc.face_budget) + "\n";
  s += "sfc.min_half_extent = " + g17(cfg.sfc.min_half_extent) + "\n";
  return s;
}

}  // namespace formflight
