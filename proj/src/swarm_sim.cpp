#include "formflight/swarm_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>

#include "formflight/rng.hpp"
#include "formflight/textio.hpp"
#include "formflight/wire.hpp"

namespace formflight {

FormationShape triangle6_shape(double circumradius) {
  if (!(circumradius > 0.0)) throw std::invalid_argument("triangle6_shape: circumradius must be positive");
  const double r = circumradius;
  const double h = std::sqrt(3.0) / 2.0;
  FormationShape shape;
  shape.push_back({r, 0.0, 0.0});
  shape.push_back({0.25 * r, h * 0.5 * r, 0.0});
  shape.push_back({-0.5 * r, h * r, 0.0});
  shape.push_back({-0.5 * r, 0.0, 0.0});
  shape.push_back({-0.5 * r, -h * r, 0.0});
  shape.push_back({0.25 * r, -h * 0.5 * r, 0.0});
  return shape;
}

double formation_similarity(const std::vector<Eigen::Vector3d>& positions_by_slot,
                            const FormationShape& shape) {
  const std::size_t n = positions_by_slot.size();
  if (n == 0 || n != shape.size())
    throw std::invalid_argument("formation_similarity: positions/shape size mismatch");
  Eigen::Vector3d pbar = Eigen::Vector3d::Zero();
  Eigen::Vector3d qbar = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    pbar += positions_by_slot[i];
    qbar += shape[i];
  }
  pbar /= static_cast<double>(n);
  qbar /= static_cast<double>(n);

  double qq = 0.0, pq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d qt = shape[i] - qbar;
    qq += qt.squaredNorm();
    pq += (positions_by_slot[i] - pbar).dot(qt);
  }
  if (qq < 1e-18) throw std::invalid_argument("formation_similarity: degenerate shape");
  const double sigma = pq / qq;
  if (std::abs(sigma) < 1e-12) return std::numeric_limits<double>::infinity();

  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ssr += (positions_by_slot[i] - pbar - sigma * (shape[i] - qbar)).squaredNorm();
  return ssr / (static_cast<double>(n) * sigma * sigma);
}

const char* outcome_name(EpisodeOutcome o) {
  switch (o) {
    case EpisodeOutcome::Reached: return "reached";
    case EpisodeOutcome::Timeout: return "timeout";
    case EpisodeOutcome::PlannerStuck: return "planner_stuck";
    case EpisodeOutcome::AgentError: return "agent_error";
  }
  return "unknown";
}

std::string report_to_string(const EpisodeReport& r) {
  std::string s;
  s += "success = " + std::string(r.success ? "true" : "false") + "\n";
  s += "outcome = " + std::string(outcome_name(r.outcome)) + "\n";
  s += "completion_time = " + g17(r.completion_time) + "\n";
  s += "avg_similarity = " + g17(r.avg_similarity) + "\n";
  s += "max_similarity = " + g17(r.max_similarity) + "\n";
  s += "min_obstacle_clearance = " + g17(r.min_obstacle_clearance) + "\n";
  s += "min_mutual_distance = " + g17(r.min_mutual_distance) + "\n";
  s += "obstacle_violations = " + std::to_string(r.obstacle_violations) + "\n";
  s += "mutual_violations = " + std::to_string(r.mutual_violations) + "\n";
  s += "min_scale = " + g17(r.min_scale) + "\n";
  s += "final_center_error = " + g17(r.final_center_error) + "\n";
  s += "max_speed = " + g17(r.max_speed) + "\n";
  s += "max_accel = " + g17(r.max_accel) + "\n";
  s += "cycles = " + std::to_string(r.cycles) + "\n";
  s += "hold_cycles = " + std::to_string(r.hold_cycles) + "\n";
  if (!r.error.empty()) s += "error = " + r.error + "\n";
  return s;
}

void write_report_file(const EpisodeReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << report_to_string(report);
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "time,uav,px,py,pz,vx,vy,vz,f,d_obs,scale\n";
  for (const auto& r : rows) {
    out << g17(r.time) << ',' << r.uav << ',' << g17(r.position.x()) << ','
        << g17(r.position.y()) << ',' << g17(r.position.z()) << ',' << g17(r.velocity.x())
        << ',' << g17(r.velocity.y()) << ',' << g17(r.velocity.z()) << ','
        << g17(r.similarity) << ',' << g17(r.d_obs) << ',' << g17(r.scale) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

// Escalation schedule for a swarm that stops making progress, where
// "progress" means executed centroid motion toward the goal across a ~3 s
// trailing window, not whatever the current winner promises. ~1 s of stall
// enables retreat sampling; ~3 s starts contract-and-regroup squeezing; ~7 s
// — long enough for the squeeze to bottom out and prove the pocket is a
// dead end — marks the spot as tabu and switches to a commanded group
// retreat; the mark fades after ~15 s so a corridor that is genuinely the
// only way through becomes usable again.
constexpr std::size_t kProgressWindowCycles = 30;
constexpr double kMinWindowGain = 0.15;
// Below the full progress bar but above this, the swarm is grinding: moving,
// slowly, the way a tight passage is actually threaded. Escalation freezes.
constexpr double kGrindWindowGain = 0.05;
constexpr long kSqueezeThresholdCycles = 30;
constexpr long kPrisonThresholdCycles = 70;
constexpr long kTabuLifetimeCycles = 150;
constexpr double kTabuMergeRadius = 1.0;

double gamma_distance(const Eigen::Vector3d& a, const Eigen::Vector3d& b, double lambda) {
  Eigen::Vector3d diff = a - b;
  diff.z() *= lambda;
  return diff.norm();
}

Eigen::Vector3d project_into_polytope(const Polytope& poly, Eigen::Vector3d x) {
  for (int sweep = 0; sweep < 60; ++sweep) {
    double worst = 0.0;
    for (Eigen::Index f = 0; f < poly.normals.rows(); ++f) {
      const double excess = poly.normals.row(f).dot(x) - poly.offsets(f);
      if (excess > 0.0) x -= excess * poly.normals.row(f).transpose();
      worst = std::max(worst, excess);
    }
    if (worst <= 1e-9) break;
  }
  return x;
}

// Crude max-margin ascent: walk away from whichever faces are tightest while
// staying feasible. Used to back a wedged agent out of a corner between cut
// faces, where projections of an unreachable target are stationary.
Eigen::Vector3d polytope_interior_point(const Polytope& poly, Eigen::Vector3d x) {
  for (int iter = 0; iter < 40; ++iter) {
    double min_slack = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < poly.normals.rows(); ++f)
      min_slack = std::min(min_slack, poly.offsets(f) - poly.normals.row(f).dot(x));
    Eigen::Vector3d dir = Eigen::Vector3d::Zero();
    for (Eigen::Index f = 0; f < poly.normals.rows(); ++f) {
      const double slack = poly.offsets(f) - poly.normals.row(f).dot(x);
      if (slack <= min_slack + 0.2) dir -= poly.normals.row(f).transpose();
    }
    if (dir.norm() < 1e-9) break;
    x = project_into_polytope(poly, x + 0.05 * dir.normalized());
  }
  return x;
}

}  // namespace

Simulator::Simulator(const ScenarioSpec& scenario, const SwarmConfig& config)
    : scenario_(scenario), cfg_(config) {
  if (cfg_.n_uavs < 1) throw std::invalid_argument("sim: need at least one uav");
  if (cfg_.shape.size() != static_cast<std::size_t>(cfg_.n_uavs))
    throw std::invalid_argument("sim: shape size must equal n_uavs");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& q : cfg_.shape) centroid += q;
  centroid /= static_cast<double>(cfg_.n_uavs);
  if (centroid.norm() > 1e-6)
    throw std::invalid_argument("sim: shape centroid must be at the origin");
  if (!(cfg_.uav_radius > 0.0)) throw std::invalid_argument("sim: uav_radius must be positive");
  if (!(cfg_.goal_tolerance > 0.0)) throw std::invalid_argument("sim: goal_tolerance must be positive");
  if (!(cfg_.distortion_limit > 0.0)) throw std::invalid_argument("sim: distortion_limit must be positive");
  if (!(cfg_.episode_timeout > 0.0)) throw std::invalid_argument("sim: episode_timeout must be positive");
  if (!(cfg_.d_cap > 0.0)) throw std::invalid_argument("sim: d_cap must be positive");

  const double dt = cfg_.mppi.dt;
  exec_steps_ = static_cast<int>(std::lround(cfg_.replan_period / dt));
  if (exec_steps_ < 1 || std::abs(exec_steps_ * dt - cfg_.replan_period) > 1e-9)
    throw std::invalid_argument("sim: replan_period must be a positive multiple of mppi.dt");
  if (exec_steps_ > cfg_.mppi.horizon)
    throw std::invalid_argument("sim: replan_period longer than the planning horizon");
  if (cfg_.front.steps_per_sequence != cfg_.mppi.horizon)
    throw std::invalid_argument("sim: guidance steps must equal the mppi horizon");

  cfg_.front_weights.s_des = cfg_.s_des;  // single source of truth for the desired scale

  grid_ = generate_scenario(scenario_);
  field_ = build_edt(grid_, cfg_.d_cap);
  goal_center_ = scenario_.goal;

  auto shape_ptr = std::make_shared<const FormationShape>(cfg_.shape);
  sigma_.resize(cfg_.n_uavs);
  for (int i = 0; i < cfg_.n_uavs; ++i) sigma_[i] = i;
  scale_now_ = cfg_.s_des;
  min_scale_ = cfg_.s_des;

  agents_.resize(cfg_.n_uavs);
  for (int i = 0; i < cfg_.n_uavs; ++i) {
    Agent& a = agents_[i];
    a.state.p = scenario_.start + cfg_.s_des * cfg_.shape[i];
    a.state.v = Eigen::Vector3d::Zero();
    a.state.a = Eigen::Vector3d::Zero();
    a.state.psi = 0.0;
    a.d_obs = query_distance(field_, a.state.p);
    if (a.d_obs <= cfg_.uav_radius)
      throw std::invalid_argument("sim: start formation overlaps obstacles");
    MppiParams mp = cfg_.mppi;
    mp.seed = mix_seed(cfg_.master_seed, 0xB0B, static_cast<std::uint64_t>(i));
    a.controller = std::make_unique<MppiController>(mp);
  }

  min_clearance_ = std::numeric_limits<double>::infinity();
  min_mutual_ = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg_.n_uavs; ++i) {
    min_clearance_ = std::min(min_clearance_, agents_[i].d_obs);
    for (int j = i + 1; j < cfg_.n_uavs; ++j)
      min_mutual_ = std::min(min_mutual_, gamma_distance(agents_[i].state.p, agents_[j].state.p,
                                                         cfg_.cost.downwash_lambda));
  }

  record_similarity();
  append_trace_rows();
}

Eigen::Vector3d Simulator::swarm_center() const {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& a : agents_) c += a.state.p;
  return c / static_cast<double>(agents_.size());
}

double Simulator::similarity_now() const {
  std::vector<Eigen::Vector3d> by_slot(agents_.size());
  for (std::size_t i = 0; i < agents_.size(); ++i) by_slot[sigma_[i]] = agents_[i].state.p;
  return formation_similarity(by_slot, cfg_.shape);
}

void Simulator::record_similarity() { f_samples_.emplace_back(time_, similarity_now()); }

void Simulator::append_trace_rows() {
  const double f = f_samples_.back().second;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    TraceRow row;
    row.time = time_;
    row.uav = static_cast<int>(i);
    row.position = agents_[i].state.p;
    row.velocity = agents_[i].state.v;
    row.similarity = f;
    row.d_obs = query_distance(field_, agents_[i].state.p);
    row.scale = scale_now_;
    trace_.push_back(row);
  }
}

void Simulator::sense_phase(std::vector<std::vector<std::uint8_t>>& reports) {
  reports.clear();
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Agent& a = agents_[i];
    a.d_obs = query_distance(field_, a.state.p);
    StateReport rep;
    rep.uav = static_cast<std::uint32_t>(i);
    rep.position = a.state.p;
    rep.d_obs = a.d_obs;
    rep.polytope = generate_sfc(a.state.p, grid_, cfg_.sfc);
    BusMessage msg{static_cast<std::uint32_t>(i), static_cast<std::uint64_t>(cycle_), rep};
    reports.push_back(encode_message(msg));
  }
}

bool Simulator::lead_phase(const std::vector<std::vector<std::uint8_t>>& reports,
                           std::vector<std::uint8_t>& broadcast) {
  const int n = cfg_.n_uavs;
  FormationSafeRegion region;
  region.polytopes.resize(n);
  std::vector<Eigen::Vector3d> positions(n);
  std::vector<double> d_obs(n);
  for (const auto& bytes : reports) {
    BusMessage msg = decode_message(bytes);
    const auto& rep = std::get<StateReport>(msg.payload);
    if (rep.uav >= static_cast<std::uint32_t>(n)) throw std::runtime_error("sim: bad state report");
    region.polytopes[rep.uav] = rep.polytope;
    positions[rep.uav] = rep.position;
    d_obs[rep.uav] = rep.d_obs;
  }

  auto shape_ptr = std::make_shared<const FormationShape>(cfg_.shape);
  FormationConfig goal_cfg;
  goal_cfg.scale = cfg_.s_des;
  goal_cfg.center = goal_center_;
  goal_cfg.shape = shape_ptr;

  // Anchor the reference center at the least-squares fit of the reported
  // positions, which for a zero-centroid shape is just their mean. A center
  // inferred from any single agent drifts away from stragglers when the
  // formation deforms; the fit stays with the swarm.
  Eigen::Vector3d c0 = Eigen::Vector3d::Zero();
  for (const auto& p : positions) c0 += p;
  c0 /= static_cast<double>(n);
  auto rng = make_rng(cfg_.master_seed, 0xA11CE, static_cast<std::uint64_t>(cycle_));

  // Progress bookkeeping drives the whole recovery ladder, and it watches
  // what the swarm actually did, not what the planner promised: planned
  // gain misclassifies a slow squeeze (real progress, stubby winners) as a
  // jam, and loitering winners can look fine while the swarm goes nowhere.
  goal_dist_hist_.push_back((c0 - goal_center_).norm());
  if (goal_dist_hist_.size() > kProgressWindowCycles + 1) goal_dist_hist_.pop_front();
  const bool window_full = goal_dist_hist_.size() == kProgressWindowCycles + 1;
  // The counter climbs only while the trailing window shows no real motion;
  // grinding freezes it, and only sustained full-length winners (checked at
  // execution, below) stand the ladder back down. A window that merely echoes
  // one executed hop must not reset anything — that is how the squeeze's own
  // delivery used to unratchet the scale and re-splay the formation.
  const double window_gain =
      window_full ? goal_dist_hist_.front() - goal_dist_hist_.back() : kMinWindowGain;
  if (window_full && window_gain < kGrindWindowGain) ++consecutive_holds_;
  if (scale_now_ <= cfg_.front.s_min * 1.001) {
    if (floor_since_ < 0) floor_since_ = cycle_;
  } else {
    floor_since_ = -1;
  }

  GuidanceBroadcast guide;
  bool held = false;
  // After enough fruitless cycles the sampler may step away from the goal;
  // that is the only way a wedged formation can leave a pocket.
  const bool allow_retreat = consecutive_holds_ >= 10;
  std::vector<Eigen::Vector3d> tabu_pts;
  std::erase_if(tabu_markers_,
                [&](const auto& m) { return cycle_ - m.first > kTabuLifetimeCycles; });
  tabu_pts.reserve(tabu_markers_.size());
  for (const auto& m : tabu_markers_) tabu_pts.push_back(m.second);
  const auto mark_tabu = [&](const Eigen::Vector3d& c) {
    for (auto& m : tabu_markers_)
      if ((m.second - c).head<2>().norm() < kTabuMergeRadius) {
        m.first = cycle_;  // same spot again: refresh instead of stacking
        return;
      }
    tabu_markers_.emplace_back(cycle_, c);
  };
  // Realign the slot assignment to wherever the swarm actually is, contract
  // the reference scale a notch, and steer everyone toward their slot
  // target, clipped to stay inside their own corridor. Shrinking targets
  // slide toward the center and out of obstacle shadows no single convex
  // corridor can see around; the sampler re-expands toward s_des once free.
  const auto regroup_contracting = [&](double rate) {
    scale_now_ = std::max(cfg_.front.s_min, scale_now_ * rate);
    min_scale_ = std::min(min_scale_, scale_now_);
    AssignmentProblem realign;
    realign.costs.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        realign.costs(i, j) = (positions[i] - (c0 + scale_now_ * cfg_.shape[j])).norm();
    sigma_ = auction_assign(realign, cfg_.assign_epsilon).target_of;

    guide.assignment = sigma_;
    guide.waypoints.assign(n, {});
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d target = c0 + scale_now_ * cfg_.shape[sigma_[i]];
      const Polytope& poly = region.polytopes[i];
      Eigen::Vector3d hold_point;
      if (contains(poly, target)) {
        hold_point = target;
      } else {
        // The slot target is unreachable inside this agent's corridor, and
        // chasing its projection is what wedges agents into corners between
        // cut faces. Back into the most open part of the corridor instead;
        // the corridor widens as the agent retreats, until the target fits
        // again and sampling can resume.
        hold_point = polytope_interior_point(poly, positions[i]);
      }
      guide.waypoints[i].assign(cfg_.front.steps_per_sequence, hold_point);
    }
  };
  try {
    PlanResult plan = plan_formation_paths(c0, scale_now_, region, sigma_, positions, d_obs,
                                           goal_cfg, cfg_.front, cfg_.front_weights, rng,
                                           prev_direction_, cfg_.assign_epsilon, allow_retreat,
                                           tabu_pts.empty() ? nullptr : &tabu_pts);
    const double planned_gain = (c0 - goal_center_).norm() -
                                (plan.winner.configs.back().center - goal_center_).norm();
    const bool plan_inches = planned_gain >= 0.05;
    // Planner promises are cheap — winners here have claimed gains for
    // whole stalls without moving the swarm a centimeter. The ladder
    // escalates on executed truth (the trailing window) and stands aside
    // only where promises are the sole way executed motion can restart.
    const bool grinding = !window_full || window_gain >= kGrindWindowGain;
    // The reference scale bottoming out is not enough to condemn a spot:
    // the physical formation lags the reference by seconds, and the tight
    // pose deserves a window of sampling attempts before the squeeze is
    // declared hopeless.
    const bool floor_proven = floor_since_ >= 0 && cycle_ - floor_since_ >= 30;
    // Squeezing is finished when the reference scale has bottomed out and
    // the formation has physically caught up with it. From that pose the
    // winners — typically short advancing stubs — are the only way motion
    // can restart, so they execute even while the window still reads zero.
    const bool squeeze_done =
        scale_now_ <= cfg_.front.s_min * 1.001 && similarity_now() <= 0.02;
    if (squeeze_done && !had_squeeze_done_) {
      // A squeeze just delivered its tight pose. The dead-time budget for
      // this pose starts fresh — inheriting the whole pre-squeeze park
      // would hand the spot to the prison before the stubs get their turn.
      consecutive_holds_ = std::min(consecutive_holds_, kSqueezeThresholdCycles);
      had_squeeze_done_ = true;
    }
    bool near_tabu = false;
    for (const Eigen::Vector3d& m : tabu_pts)
      near_tabu |= (c0 - m).head<2>().norm() < cfg_.front_weights.tabu_radius + 0.5;
    if (!grinding && !prison_active_ &&
        ((!plan_inches && consecutive_holds_ >= kPrisonThresholdCycles && floor_proven) ||
         consecutive_holds_ >= 2 * kPrisonThresholdCycles)) {
      // Squeezing didn't help (or never could): this pocket is a dead end
      // at any scale. Mark it so replans steer around it. The backstop arm
      // fires even against a promising winner — fourteen straight seconds
      // of undelivered promises is what bankruptcy looks like.
      prison_active_ = true;
      mark_tabu(c0);
      near_tabu = true;
    }

    if (!grinding && prison_active_ && near_tabu) {
      // No sequence the sampler can draw beats loitering here, because a
      // detour spends its whole horizon further from the goal than standing
      // still. Command what sampling cannot elect — a rigid group retreat,
      // which keeps the formation and its mutual spacing intact while it
      // backs out of the marked bubble; the mark steers the next approach
      // elsewhere, and anything promising real gain interrupts the retreat.
      Eigen::Vector3d back = c0 - goal_center_;
      back.z() = 0.0;
      if (back.norm() < 1e-9) back = Eigen::Vector3d(-1.0, 0.0, 0.0);
      back.normalize();
      // The whole group backs up by the same amount so the retreat stays
      // rigid (per-agent clamping shears the formation apart). Only the
      // world box caps it — the trajectory optimizer handles obstacles, but
      // nothing else stops a long retreat from marching off the map.
      double backup = cfg_.front.steps_per_sequence * cfg_.front.r_min;
      const auto& g = grid();
      for (int i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
          const double lo = g.origin[a] + 0.5;
          const double hi = g.origin[a] + g.resolution * g.dims[a] - 0.5;
          if (back[a] > 1e-12)
            backup = std::min(backup, std::max(0.0, (hi - positions[i][a]) / back[a]));
          else if (back[a] < -1e-12)
            backup = std::min(backup, std::max(0.0, (lo - positions[i][a]) / back[a]));
        }
      }
      guide.assignment = sigma_;
      guide.waypoints.assign(n, {});
      for (int i = 0; i < n; ++i) {
        guide.waypoints[i].resize(cfg_.front.steps_per_sequence);
        for (int k = 0; k < cfg_.front.steps_per_sequence; ++k) {
          const double dist = std::min(backup, (k + 1) * cfg_.front.r_min);
          guide.waypoints[i][k] = positions[i] + dist * back;
        }
      }
      prev_direction_.reset();
      cruise_streak_ = 0;
    } else if (!grinding && consecutive_holds_ >= kSqueezeThresholdCycles &&
               !(plan_inches && squeeze_done)) {
      // Stalled with nothing executed: squeeze. A tighter formation fits
      // through gaps that reject it at the current scale, so contract and
      // regroup until either the tight pose starts producing advancing
      // winners (executed below) or the stall graduates to a marked
      // retreat above. After a retreat this branch is also the parking
      // pose while the mark ages out.
      regroup_contracting(0.96);
      prev_direction_.reset();
      cruise_streak_ = 0;
      // Re-arm the fresh-pose clamp only while actually contracting; a
      // squeeze that idles at an already-tight pose must not keep feeding
      // the clamp, or the prison could be starved forever.
      if (!squeeze_done) had_squeeze_done_ = false;
    } else {
      guide.assignment = plan.assignment.target_of;
      guide.waypoints = plan.paths.paths;
      sigma_ = plan.assignment.target_of;
      // While stalled, the reference scale only ratchets down — otherwise
      // every executed winner undoes the squeeze's contraction and the
      // formation oscillates around a width that still doesn't fit.
      scale_now_ = consecutive_holds_ >= kSqueezeThresholdCycles
                       ? std::min(scale_now_, plan.winner.configs.front().scale)
                       : plan.winner.configs.front().scale;
      min_scale_ = std::min(min_scale_, scale_now_);
      prev_direction_ = plan.first_direction;
      // The ladder stands down only for sustained cruising — full-length
      // winners with real headway. Short stubs and one-off hops keep the
      // ratchet and the dead-time counter where they are.
      const bool cruising =
          plan.winner.steps_completed == cfg_.front.steps_per_sequence && planned_gain >= 0.5;
      cruise_streak_ = cruising ? cruise_streak_ + 1 : 0;
      if (cruise_streak_ >= 10) {
        consecutive_holds_ = 0;
        prison_active_ = false;
      }
    }
  } catch (const NoSafeFormationStep&) {
    // Nothing safe to sample at all: regroup instead of freezing. Shear
    // between the nominal formation and the real positions shrinks until
    // sampling works again.
    held = true;
    ++hold_cycles_;
    if (allow_retreat) prev_direction_.reset();  // stale heading shouldn't bias the recovery plan
    cruise_streak_ = 0;
    regroup_contracting(0.98);
  }

  BusMessage msg{0, static_cast<std::uint64_t>(cycle_), guide};
  broadcast = encode_message(msg);
  return held;
}

void Simulator::optimize_phase(const std::vector<std::uint8_t>& broadcast,
                               std::vector<std::vector<std::uint8_t>>& shares) {
  const int n = cfg_.n_uavs;
  const int horizon = cfg_.mppi.horizon;
  BusMessage bmsg = decode_message(broadcast);
  const auto& guide = std::get<GuidanceBroadcast>(bmsg.payload);
  if (static_cast<int>(guide.waypoints.size()) != n ||
      (n > 0 && static_cast<int>(guide.waypoints.front().size()) != horizon))
    throw std::runtime_error("sim: malformed guidance broadcast");

  shares.clear();
  for (int i = 0; i < n; ++i) {
    Agent& a = agents_[i];
    a.guidance = guide.waypoints[i];

    // Neighbor predictions: the trajectory each neighbor shared last cycle,
    // advanced by the part it has already flown; their fresh guidance path
    // fills in until a first trajectory exists.
    std::vector<std::vector<Eigen::Vector3d>> neighbors;
    neighbors.reserve(n > 1 ? n - 1 : 0);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      std::vector<Eigen::Vector3d> pred(horizon);
      const Agent& b = agents_[j];
      if (b.has_shared) {
        const auto& st = b.shared.states;
        for (int k = 0; k < horizon; ++k) {
          std::size_t idx = std::min<std::size_t>(k + 1 + exec_steps_, st.size() - 1);
          pred[k] = st[idx].p;
        }
      } else {
        for (int k = 0; k < horizon; ++k) pred[k] = guide.waypoints[j][k];
      }
      neighbors.push_back(std::move(pred));
    }

    RolloutContext ctx;
    ctx.waypoints = std::span<const Eigen::Vector3d>(a.guidance);
    ctx.field = &field_;
    ctx.neighbors = std::span<const std::vector<Eigen::Vector3d>>(neighbors);
    ctx.dt = cfg_.mppi.dt;
    ctx.cost = cfg_.cost;

    // Seed the nominal yaw rate so the heading tracks the guidance direction.
    Eigen::Vector3d dir = a.guidance.back() - a.state.p;
    if (dir.head<2>().norm() > 0.1) {
      const double az = std::atan2(dir.y(), dir.x());
      const double rate = wrap_angle(az - a.state.psi) / (horizon * cfg_.mppi.dt);
      for (auto& u : a.controller->nominal()) u.psi_rate = rate;
    }

    Trajectory traj = a.controller->step(a.state, ctx);
    TrajectoryShare share;
    share.uav = static_cast<std::uint32_t>(i);
    share.trajectory = std::move(traj);
    BusMessage msg{static_cast<std::uint32_t>(i), static_cast<std::uint64_t>(cycle_), share};
    shares.push_back(encode_message(msg));
  }

  // Commit all shares at once so this cycle's optimizations only ever saw
  // last cycle's trajectories.
  for (const auto& bytes : shares) {
    BusMessage msg = decode_message(bytes);
    const auto& share = std::get<TrajectoryShare>(msg.payload);
    if (share.uav >= static_cast<std::uint32_t>(n)) throw std::runtime_error("sim: bad trajectory share");
    agents_[share.uav].shared = share.trajectory;
    agents_[share.uav].has_shared = true;
  }
}

void Simulator::execute_phase() {
  const double dt = cfg_.mppi.dt;
  for (int e = 0; e < exec_steps_; ++e) {
    for (auto& a : agents_) {
      a.state = propagate(a.state, a.shared.controls[e], dt);
      const double clearance = query_distance(field_, a.state.p);
      min_clearance_ = std::min(min_clearance_, clearance);
      if (clearance < cfg_.uav_radius) ++obstacle_violations_;
      max_speed_ = std::max(max_speed_, a.state.v.norm());
      max_accel_ = std::max(max_accel_, a.state.a.norm());
    }
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      for (std::size_t j = i + 1; j < agents_.size(); ++j) {
        const double d = gamma_distance(agents_[i].state.p, agents_[j].state.p,
                                        cfg_.cost.downwash_lambda);
        min_mutual_ = std::min(min_mutual_, d);
        if (d < 2.0 * cfg_.uav_radius) ++mutual_violations_;
      }
    }
  }
  time_ += exec_steps_ * dt;
}

void Simulator::step_cycle() {
  if (done_) return;
  try {
    std::vector<std::vector<std::uint8_t>> reports;
    sense_phase(reports);
    std::vector<std::uint8_t> broadcast;
    lead_phase(reports, broadcast);
    std::vector<std::vector<std::uint8_t>> shares;
    optimize_phase(broadcast, shares);
    execute_phase();
    ++cycle_;
    record_similarity();
    append_trace_rows();

    if ((swarm_center() - goal_center_).norm() <= cfg_.goal_tolerance) {
      finish(EpisodeOutcome::Reached);
    } else if (time_ >= cfg_.episode_timeout - 1e-9) {
      finish(hold_cycles_ * 2 >= cycle_ ? EpisodeOutcome::PlannerStuck : EpisodeOutcome::Timeout);
    }
  } catch (const std::exception& e) {
    error_ = e.what();
    finish(EpisodeOutcome::AgentError);
  }
}

void Simulator::finish(EpisodeOutcome outcome) {
  done_ = true;
  outcome_ = outcome;
}

EpisodeReport Simulator::run() {
  while (!done_) step_cycle();

  EpisodeReport r;
  r.outcome = outcome_;
  r.completion_time = time_;
  r.max_similarity = 0.0;
  for (const auto& [t, f] : f_samples_) r.max_similarity = std::max(r.max_similarity, f);
  if (f_samples_.size() < 2) {
    r.avg_similarity = f_samples_.empty() ? 0.0 : f_samples_.front().second;
  } else {
    double area = 0.0;
    for (std::size_t k = 0; k + 1 < f_samples_.size(); ++k) {
      const auto& [t0, f0] = f_samples_[k];
      const auto& [t1, f1] = f_samples_[k + 1];
      area += 0.5 * (f0 + f1) * (t1 - t0);
    }
    r.avg_similarity = area / (f_samples_.back().first - f_samples_.front().first);
  }
  r.min_obstacle_clearance = min_clearance_;
  r.min_mutual_distance = min_mutual_;
  r.obstacle_violations = obstacle_violations_;
  r.mutual_violations = mutual_violations_;
  r.min_scale = min_scale_;
  r.final_center_error = (swarm_center() - goal_center_).norm();
  r.max_speed = max_speed_;
  r.max_accel = max_accel_;
  r.cycles = cycle_;
  r.hold_cycles = hold_cycles_;
  r.error = error_;
  r.success = outcome_ == EpisodeOutcome::Reached && obstacle_violations_ == 0 &&
              mutual_violations_ == 0 && r.max_similarity < cfg_.distortion_limit;
  return r;
}

EpisodeReport run_episode(const ScenarioSpec& scenario, const SwarmConfig& config,
                          std::vector<TraceRow>* trace) {
  Simulator sim(scenario, config);
  EpisodeReport report = sim.run();
  if (trace) *trace = sim.trace();
  return report;
}

}  // namespace formflight
