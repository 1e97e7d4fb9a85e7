#include "formflight/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "formflight/config_io.hpp"
#include "formflight/oracles.hpp"
#include "formflight/rng.hpp"
#include "formflight/textio.hpp"

namespace formflight {
namespace {

constexpr std::uint64_t kSuiteSeed = 777;

bool edt_suite() {
  for (int g = 0; g < 20; ++g) {
    auto rng = make_rng(kSuiteSeed, 0xED7, g);
    OccupancyGrid grid;
    grid.origin = Eigen::Vector3d(uniform_in(rng, -5.0, 5.0), uniform_in(rng, -5.0, 5.0), 0.0);
    grid.resolution = uniform_in(rng, 0.1, 0.5);
    if (g == 19) {
      grid.dims[0] = 48;
      grid.dims[1] = 40;
      grid.dims[2] = 32;
    } else {
      for (int a = 0; a < 3; ++a) grid.dims[a] = 6 + uniform_index(rng, 23);
    }
    const double density = uniform_in(rng, 0.005, 0.035);
    grid.cells.resize(grid.cell_count());
    for (auto& c : grid.cells) c = uniform01(rng) < density ? 1 : 0;

    const double d_cap = uniform_in(rng, 1.0, 6.0);
    const DistanceField fast = build_edt(grid, d_cap);
    const DistanceField slow = oracles::brute_force_edt(grid, d_cap);
    for (std::size_t i = 0; i < fast.values.size(); ++i)
      if (fast.values[i] != slow.values[i]) return false;
  }
  return true;
}

bool auction_suite() {
  for (int t = 0; t < 500; ++t) {
    auto rng = make_rng(kSuiteSeed, 0xA0C, t);
    const int n = 1 + uniform_index(rng, 7);
    AssignmentProblem problem;
    problem.costs.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) problem.costs(i, j) = uniform_in(rng, 0.0, 10.0);

    const double eps = 1e-6;
    AuctionStats stats;
    const Assignment got = auction_assign(problem, eps, &stats);
    const Assignment best = oracles::brute_force_assignment(problem.costs);

    std::vector<bool> used(n, false);
    for (int j : got.target_of) {
      if (j < 0 || j >= n || used[j]) return false;
      used[j] = true;
    }
    if (got.total_cost > best.total_cost + n * eps + 1e-9) return false;
    if (!stats.prices_monotone) return false;
    if (!swap_improvement_check(problem, got, eps)) return false;
  }
  return true;
}

Polytope random_region_polytope(std::mt19937_64& rng) {
  const Eigen::Vector3d center(uniform_in(rng, -4.0, 4.0), uniform_in(rng, -4.0, 4.0),
                               uniform_in(rng, -4.0, 4.0));
  const int cut_faces = uniform_index(rng, 3);
  Polytope poly;
  poly.seed_point = center;
  poly.normals.resize(6 + cut_faces, 3);
  poly.offsets.resize(6 + cut_faces);
  int row = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const double half = uniform_in(rng, 0.5, 3.0);
    for (int sign = 0; sign < 2; ++sign) {
      Eigen::Vector3d n = Eigen::Vector3d::Zero();
      n[axis] = sign == 0 ? 1.0 : -1.0;
      poly.normals.row(row) = n;
      poly.offsets(row) = n.dot(center) + half;
      ++row;
    }
  }
  for (int f = 0; f < cut_faces; ++f) {
    Eigen::Vector3d n;
    do {
      n = Eigen::Vector3d(gaussian(rng), gaussian(rng), gaussian(rng));
    } while (n.norm() < 1e-9);
    n.normalize();
    poly.normals.row(row) = n;
    poly.offsets(row) = n.dot(center) + uniform_in(rng, 0.5, 2.0);
    ++row;
  }
  return poly;
}

bool close_term(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

bool front_cost_suite() {
  for (int t = 0; t < 1000; ++t) {
    auto rng = make_rng(kSuiteSeed, 0xFC0, t);
    const int n = 2 + uniform_index(rng, 5);

    auto shape = std::make_shared<FormationShape>();
    for (int i = 0; i < n; ++i)
      shape->push_back(Eigen::Vector3d(uniform_in(rng, -2.0, 2.0), uniform_in(rng, -2.0, 2.0),
                                       uniform_in(rng, -2.0, 2.0)));

    FormationSafeRegion region;
    std::vector<Eigen::Vector3d> positions;
    std::vector<double> d_obs;
    std::vector<int> assignment(n);
    for (int i = 0; i < n; ++i) {
      region.polytopes.push_back(random_region_polytope(rng));
      positions.push_back(Eigen::Vector3d(uniform_in(rng, -5.0, 5.0), uniform_in(rng, -5.0, 5.0),
                                          uniform_in(rng, -5.0, 5.0)));
      d_obs.push_back(uniform_in(rng, 0.0, 3.0));
      assignment[i] = i;
    }
    portable_shuffle(assignment, rng);

    FormationConfig fc;
    fc.scale = uniform_in(rng, 0.3, 1.5);
    fc.center = Eigen::Vector3d(uniform_in(rng, -5.0, 5.0), uniform_in(rng, -5.0, 5.0),
                                uniform_in(rng, -5.0, 5.0));
    fc.shape = shape;

    FcEvalContext ctx;
    ctx.goal_center = Eigen::Vector3d(uniform_in(rng, -8.0, 8.0), uniform_in(rng, -8.0, 8.0),
                                      uniform_in(rng, -8.0, 8.0));
    ctx.region = &region;
    ctx.positions = &positions;
    ctx.d_obs = &d_obs;
    ctx.temp_assignment = &assignment;
    ctx.prev_center = fc.center + Eigen::Vector3d(uniform_in(rng, -1.0, 1.0),
                                                  uniform_in(rng, -1.0, 1.0),
                                                  uniform_in(rng, -1.0, 1.0));
    ctx.prev_scale = uniform_in(rng, 0.3, 1.5);
    if (uniform01(rng) < 0.5) {
      Eigen::Vector3d dir(gaussian(rng), gaussian(rng), gaussian(rng));
      if (dir.norm() > 1e-9) ctx.prev_direction = dir.normalized();
    }

    FrontWeights weights;
    weights.k_g = uniform_in(rng, 0.5, 4.0);
    weights.k_s = uniform_in(rng, 0.5, 4.0);
    weights.k_safe = uniform_in(rng, 1e3, 1e6);
    weights.k_sc = uniform_in(rng, 0.5, 4.0);
    weights.k_ac = uniform_in(rng, 0.1, 2.0);
    weights.d_risk = uniform_in(rng, 0.2, 1.5);
    weights.s_des = uniform_in(rng, 0.5, 1.2);

    const FcCostTerms a = evaluate_fc_terms(fc, ctx, weights);
    const FcCostTerms b = oracles::recode_front_cost(fc, ctx, weights);
    if (!close_term(a.goal, b.goal) || !close_term(a.scale, b.scale) ||
        !close_term(a.safe, b.safe) || !close_term(a.risk, b.risk) ||
        !close_term(a.continuity, b.continuity) || !close_term(a.total(), b.total()))
      return false;
  }
  return true;
}

bool running_cost_suite() {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::PillarField;
  spec.extent = Eigen::Vector3d(20.0, 16.0, 3.0);
  spec.obstacle_count = 40;
  spec.seed = 99;
  spec.start = Eigen::Vector3d(2.0, 8.0, 1.5);
  spec.goal = Eigen::Vector3d(18.0, 8.0, 1.5);
  const OccupancyGrid grid = generate_scenario(spec);
  const DistanceField field = build_edt(grid, 5.0);

  for (int t = 0; t < 1000; ++t) {
    auto rng = make_rng(kSuiteSeed, 0x3C0, t);
    std::vector<Eigen::Vector3d> waypoints(20);
    for (auto& w : waypoints)
      w = Eigen::Vector3d(uniform_in(rng, 0.0, 20.0), uniform_in(rng, 0.0, 16.0),
                          uniform_in(rng, 0.0, 3.0));

    UavState x;
    x.p = Eigen::Vector3d(uniform_in(rng, -1.0, 21.0), uniform_in(rng, -1.0, 17.0),
                          uniform_in(rng, -0.5, 3.5));
    for (int a = 0; a < 3; ++a) {
      x.v[a] = uniform_in(rng, -3.0, 3.0);
      x.a[a] = uniform_in(rng, -4.0, 4.0);
    }
    x.psi = uniform_in(rng, -3.0, 3.0);
    ControlInput u;
    for (int a = 0; a < 3; ++a) u.jerk[a] = uniform_in(rng, -5.0, 5.0);
    u.psi_rate = uniform_in(rng, -2.0, 2.0);

    const int nn = uniform_index(rng, 4);
    std::vector<std::vector<Eigen::Vector3d>> neighbors(nn);
    for (auto& path : neighbors) {
      path.resize(waypoints.size());
      for (auto& q : path)
        q = x.p + Eigen::Vector3d(uniform_in(rng, -1.5, 1.5), uniform_in(rng, -1.5, 1.5),
                                  uniform_in(rng, -1.5, 1.5));
    }

    RolloutContext ctx;
    ctx.waypoints = std::span<const Eigen::Vector3d>(waypoints);
    ctx.field = t % 5 == 0 ? nullptr : &field;
    ctx.neighbors = std::span<const std::vector<Eigen::Vector3d>>(neighbors);
    ctx.dt = uniform_in(rng, 0.05, 0.2);
    const int k = uniform_index(rng, static_cast<int>(waypoints.size()));

    const double a = running_cost(x, u, k, ctx);
    const double b = oracles::recode_running_cost(x, u, k, ctx);
    if (!close_term(a, b)) return false;
  }
  return true;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

OracleOutcomes run_oracle_suites(std::ostream& log) {
  OracleOutcomes outcomes;
  outcomes.edt = edt_suite();
  log << "oracle edt: " << (outcomes.edt ? "PASS" : "FAIL") << "\n";
  outcomes.auction = auction_suite();
  log << "oracle auction: " << (outcomes.auction ? "PASS" : "FAIL") << "\n";
  outcomes.front_cost = front_cost_suite();
  log << "oracle front_cost: " << (outcomes.front_cost ? "PASS" : "FAIL") << "\n";
  outcomes.running_cost = running_cost_suite();
  log << "oracle running_cost: " << (outcomes.running_cost ? "PASS" : "FAIL") << "\n";
  return outcomes;
}

std::string summarize_sweep(const std::vector<std::uint64_t>& seeds,
                            const std::vector<EpisodeReport>& reports) {
  if (seeds.size() != reports.size())
    throw std::invalid_argument("summarize_sweep: seed/report count mismatch");
  std::string s;
  long successes = 0;
  double sum_avg_f = 0.0, sum_time = 0.0;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    const EpisodeReport& r = reports[k];
    s += "seed " + std::to_string(seeds[k]) + ": success=" + (r.success ? "true" : "false") +
         " outcome=" + outcome_name(r.outcome) + " time=" + g17(r.completion_time) +
         " avg_f=" + g17(r.avg_similarity) + " max_f=" + g17(r.max_similarity) +
         " min_clearance=" + g17(r.min_obstacle_clearance) +
         " obs_viol=" + std::to_string(r.obstacle_violations) +
         " mut_viol=" + std::to_string(r.mutual_violations) + "\n";
    if (r.success) {
      ++successes;
      sum_avg_f += r.avg_similarity;
      sum_time += r.completion_time;
    }
  }
  s += "episodes = " + std::to_string(seeds.size()) + "\n";
  s += "successes = " + std::to_string(successes) + "\n";
  s += "mean_avg_similarity = " + g17(successes ? sum_avg_f / successes : 0.0) + "\n";
  s += "mean_completion_time = " + g17(successes ? sum_time / successes : 0.0) + "\n";
  return s;
}

int run_manifest(const RunManifest& manifest, std::ostream& out) {
  if (manifest.mode == RunMode::OracleCheck) {
    return run_oracle_suites(out).all() ? 0 : 1;
  }

  ScenarioSpec scenario =
      manifest.scenario_path.empty() ? ScenarioSpec{} : load_scenario_file(manifest.scenario_path);
  SwarmConfig swarm =
      manifest.swarm_path.empty() ? SwarmConfig{} : load_swarm_file(manifest.swarm_path);

  std::vector<std::uint64_t> seeds = manifest.seeds;
  if (seeds.empty()) seeds.push_back(scenario.seed);
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  if (manifest.mode == RunMode::Single && seeds.size() != 1)
    throw std::invalid_argument("single mode takes exactly one seed");

  const bool writing = !manifest.out_dir.empty();
  if (writing) {
    std::filesystem::create_directories(manifest.out_dir);
    write_text_file(manifest.out_dir + "/scenario.txt", serialize_scenario(scenario));
    write_text_file(manifest.out_dir + "/swarm.txt", serialize_swarm(swarm));
  }

  std::vector<EpisodeReport> reports;
  for (std::uint64_t seed : seeds) {
    ScenarioSpec sc = scenario;
    SwarmConfig sw = swarm;
    sc.seed = seed;
    sw.master_seed = seed;
    std::vector<TraceRow> trace;
    EpisodeReport report = run_episode(sc, sw, &trace);
    reports.push_back(report);
    if (writing) {
      const std::string tag = std::to_string(seed);
      write_trace_csv(trace, manifest.out_dir + "/trace_seed" + tag + ".csv");
      write_report_file(report, manifest.out_dir + "/report_seed" + tag + ".txt");
    }
  }

  if (manifest.mode == RunMode::Single) {
    out << report_to_string(reports.front());
    return reports.front().success ? 0 : 1;
  }

  const std::string summary = summarize_sweep(seeds, reports);
  if (writing) write_text_file(manifest.out_dir + "/summary.txt", summary);
  out << summary;
  for (const EpisodeReport& r : reports)
    if (!r.success) return 1;
  return 0;
}

}  // namespace formflight
