#include "formflight/formation_front.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "formflight/rng.hpp"

namespace formflight {

namespace {

void validate_plan_inputs(const FormationSafeRegion& region, const std::vector<int>& sigma0,
                          const std::vector<Eigen::Vector3d>& positions,
                          const std::vector<double>& d_obs, const FormationConfig& goal_config,
                          const SampleParams& params, const FrontWeights& weights) {
  const std::size_t n = positions.size();
  if (n == 0) throw std::invalid_argument("plan: no UAVs");
  if (!goal_config.shape || goal_config.shape->size() != n)
    throw std::invalid_argument("plan: shape size must match UAV count");
  if (region.polytopes.size() != n || sigma0.size() != n || d_obs.size() != n)
    throw std::invalid_argument("plan: region/assignment/d_obs size mismatch");
  std::vector<bool> seen(n, false);
  for (int s : sigma0) {
    if (s < 0 || s >= static_cast<int>(n) || seen[s])
      throw std::invalid_argument("plan: sigma0 is not a permutation");
    seen[s] = true;
  }
  if (params.r_min <= 0.0) throw std::invalid_argument("plan: r_min must be positive");
  if (params.gamma_max < 0.0 || params.gamma_max > 1.0)
    throw std::invalid_argument("plan: gamma_max must lie in [0, 1]");
  if (params.scale_samples < 1 || params.num_sequences < 1 || params.steps_per_sequence < 1)
    throw std::invalid_argument("plan: sample counts must be positive");
  if (!(params.s_min > 0.0) || params.s_max < params.s_min)
    throw std::invalid_argument("plan: scale range is empty");
  if (weights.s_des < params.s_min - 1e-12 || weights.s_des > params.s_max + 1e-12)
    throw std::invalid_argument("plan: s_des outside [s_min, s_max]");
}

double angle_between(const Eigen::Vector3d& u_unit, const Eigen::Vector3d& v_unit) {
  return std::acos(std::clamp(u_unit.dot(v_unit), -1.0, 1.0));
}

}  // namespace

std::vector<Eigen::Vector3d> formation_targets(const FormationConfig& fc) {
  if (!fc.shape) throw std::invalid_argument("formation_targets: config has no shape");
  std::vector<Eigen::Vector3d> targets;
  targets.reserve(fc.shape->size());
  for (const auto& slot : *fc.shape) targets.push_back(fc.center + fc.scale * slot);
  return targets;
}

FcCostTerms evaluate_fc_terms(const FormationConfig& fc, const FcEvalContext& ctx,
                              const FrontWeights& weights) {
  if (!fc.shape || !ctx.region || !ctx.positions || !ctx.d_obs || !ctx.temp_assignment)
    throw std::invalid_argument("evaluate_fc: incomplete context");
  const std::size_t n = ctx.positions->size();
  if (fc.shape->size() != n || ctx.region->polytopes.size() != n || ctx.d_obs->size() != n ||
      ctx.temp_assignment->size() != n)
    throw std::invalid_argument("evaluate_fc: size mismatch");

  FcCostTerms terms;
  terms.goal = weights.k_g * (fc.center - ctx.goal_center).norm();
  terms.scale = weights.k_s * std::abs(fc.scale - weights.s_des);

  double d_sum = 0.0;
  for (double d : *ctx.d_obs) d_sum += d;

  for (std::size_t i = 0; i < n; ++i) {
    const int slot = (*ctx.temp_assignment)[i];
    const Eigen::Vector3d target = fc.center + fc.scale * (*fc.shape)[slot];
    if (!contains(ctx.region->polytopes[i], target)) terms.safe += weights.k_safe;
    const double di = (*ctx.d_obs)[i];
    if (di > weights.d_risk && d_sum > 0.0) {
      terms.risk += (di / d_sum) * (target - (*ctx.positions)[i]).norm();
    }
  }

  terms.continuity = weights.k_sc * std::abs(fc.scale - ctx.prev_scale);
  const Eigen::Vector3d seg = fc.center - ctx.prev_center;
  const double seg_len = seg.norm();
  if (ctx.prev_direction && seg_len > 1e-12) {
    terms.continuity += weights.k_ac * angle_between(seg / seg_len, *ctx.prev_direction);
  }

  if (ctx.tabu && weights.tabu_radius > 0.0) {
    for (const Eigen::Vector3d& m : *ctx.tabu) {
      const double d = (fc.center - m).head<2>().norm();
      if (d < weights.tabu_radius)
        terms.tabu += weights.k_tabu * (1.0 - d / weights.tabu_radius);
    }
  }
  return terms;
}

double evaluate_fc(const FormationConfig& fc, const FcEvalContext& ctx,
                   const FrontWeights& weights) {
  return evaluate_fc_terms(fc, ctx, weights).total();
}

Eigen::Vector3d sample_center(const Eigen::Vector3d& c_prev, const Eigen::Vector3d& c_goal,
                              const SampleParams& params, std::mt19937_64& rng,
                              bool full_sphere, const Eigen::Vector3d* persist_dir) {
  Eigen::Vector3d axis = c_goal - c_prev;
  const double len = axis.norm();
  if (len < 1e-12) return c_goal;
  axis /= len;
  Eigen::Vector3d dir;
  if (persist_dir) {
    // Keep the previous heading, jittered; lets one sequence curve smoothly
    // around an obstacle instead of scattering.
    do {
      dir = *persist_dir + params.direction_jitter *
                               Eigen::Vector3d(gaussian(rng), gaussian(rng), gaussian(rng));
    } while (dir.norm() < 1e-9);
    dir.normalize();
  } else {
    // Uniform direction on the sphere, folded into the goal-facing hemisphere.
    do {
      dir = Eigen::Vector3d(gaussian(rng), gaussian(rng), gaussian(rng));
    } while (dir.norm() < 1e-9);
    dir.normalize();
    if (!full_sphere && dir.dot(axis) < 0.0) dir = -dir;
  }
  const double gamma = uniform_in(rng, 0.0, params.gamma_max);
  return c_prev + (1.0 + gamma) * params.r_min * dir;
}

std::vector<double> scale_grid(const SampleParams& params) {
  std::vector<double> grid;
  grid.reserve(params.scale_samples);
  if (params.scale_samples == 1) {
    grid.push_back(params.s_min);
    return grid;
  }
  const double step = (params.s_max - params.s_min) / (params.scale_samples - 1);
  for (int k = 0; k < params.scale_samples; ++k) grid.push_back(params.s_min + k * step);
  return grid;
}

PlanResult plan_formation_paths(const Eigen::Vector3d& c0, double s0,
                                const FormationSafeRegion& region,
                                const std::vector<int>& sigma0,
                                const std::vector<Eigen::Vector3d>& positions,
                                const std::vector<double>& d_obs,
                                const FormationConfig& goal_config,
                                const SampleParams& params, const FrontWeights& weights,
                                std::mt19937_64& rng,
                                const std::optional<Eigen::Vector3d>& prev_direction,
                                double assign_epsilon, bool allow_retreat,
                                const std::vector<Eigen::Vector3d>* tabu) {
  validate_plan_inputs(region, sigma0, positions, d_obs, goal_config, params, weights);
  const std::size_t n = positions.size();
  const auto scales = scale_grid(params);
  const int t_s = params.steps_per_sequence;

  // One substream per sequence: rollouts are independent and reproduce
  // bit-identically regardless of evaluation order.
  const std::uint64_t base = rng();

  FcEvalContext ctx;
  ctx.goal_center = goal_config.center;
  ctx.region = &region;
  ctx.positions = &positions;
  ctx.d_obs = &d_obs;
  ctx.temp_assignment = &sigma0;
  ctx.tabu = tabu;

  std::vector<FormationSequence> sequences(params.num_sequences);
  for (int s = 0; s < params.num_sequences; ++s) {
    auto seq_rng = make_rng(base, 0xFACE, static_cast<std::uint64_t>(s));
    FormationSequence& seq = sequences[s];
    ctx.prev_center = c0;
    ctx.prev_scale = s0;
    ctx.prev_direction = prev_direction;
    double last_step_cost = 0.0;
    for (int j = 0; j < t_s; ++j) {
      // First step explores freely; later steps follow the sequence's own
      // heading so the walk stays coherent enough to thread passages.
      const Eigen::Vector3d* persist =
          (j > 0 && ctx.prev_direction) ? &*ctx.prev_direction : nullptr;
      const Eigen::Vector3d c = sample_center(ctx.prev_center, goal_config.center, params,
                                              seq_rng, allow_retreat, persist);
      FormationConfig fc{scales[0], c, goal_config.shape};
      // Pair the sampled center with its best scale by single-step cost;
      // ties keep the lower grid index.
      FcCostTerms best_terms;
      double best_total = std::numeric_limits<double>::infinity();
      double best_scale = scales[0];
      for (double sc : scales) {
        fc.scale = sc;
        const FcCostTerms terms = evaluate_fc_terms(fc, ctx, weights);
        const double total = terms.total();
        if (total < best_total) {
          best_total = total;
          best_terms = terms;
          best_scale = sc;
        }
      }
      if (best_terms.safe != 0.0) break;  // unsafe step is not appended
      fc.scale = best_scale;
      seq.configs.push_back(fc);
      seq.total_cost += best_total;
      last_step_cost = best_total;
      seq.steps_completed = j + 1;
      const Eigen::Vector3d seg = c - ctx.prev_center;
      const double seg_len = seg.norm();
      if (seg_len > 1e-12) ctx.prev_direction = seg / seg_len;
      ctx.prev_center = c;
      ctx.prev_scale = best_scale;
    }
    // A halted sequence is priced as if it parked at its final config for
    // the missing steps, plus a small per-step tax. A flat penalty large
    // enough to matter makes every partial sequence lose to every
    // full-length one, which starves exactly the short advances that let a
    // receding-horizon planner nibble into a tight passage; pricing the
    // park keeps the comparison honest in both directions.
    seq.total_cost += (last_step_cost + weights.suspend_penalty_per_step) *
                      static_cast<double>(t_s - seq.steps_completed);
  }

  // Lowest total cost among sequences that made at least one step; stable on
  // ties. All-empty means there is nothing safe to hand out this cycle.
  int best_idx = -1;
  for (int s = 0; s < params.num_sequences; ++s) {
    if (sequences[s].steps_completed < 1) continue;
    if (best_idx < 0 || sequences[s].total_cost < sequences[best_idx].total_cost) best_idx = s;
  }
  if (best_idx < 0) throw NoSafeFormationStep();

  PlanResult result;
  result.winner = std::move(sequences[best_idx]);

  // Task assignment on the first configuration of the winning sequence.
  const auto first_targets = formation_targets(result.winner.configs.front());
  AssignmentProblem problem;
  problem.costs.resize(static_cast<int>(n), static_cast<int>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      problem.costs(static_cast<int>(i), static_cast<int>(j)) =
          (positions[i] - first_targets[j]).norm();
  Assignment sigma_star = auction_assign(problem, assign_epsilon);

  // The sequence was safe-checked under sigma0. Only hand out the auction
  // result if every reassigned target stays inside its new owner's polytope
  // for every config; otherwise keep sigma0, which passed by construction.
  bool sigma_star_ok = true;
  for (const auto& fc : result.winner.configs) {
    for (std::size_t i = 0; i < n && sigma_star_ok; ++i) {
      const Eigen::Vector3d target = fc.center + fc.scale * (*fc.shape)[sigma_star.target_of[i]];
      if (!contains(region.polytopes[i], target)) sigma_star_ok = false;
    }
    if (!sigma_star_ok) break;
  }
  if (!sigma_star_ok) {
    sigma_star.target_of = sigma0;
    sigma_star.total_cost = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sigma_star.total_cost += problem.costs(static_cast<int>(i), sigma0[i]);
    result.assignment_fell_back = true;
  }
  result.assignment = std::move(sigma_star);

  // Waypoints through the assigned slots, padded by holding the last config.
  result.paths.paths.assign(n, {});
  for (std::size_t i = 0; i < n; ++i) {
    auto& path = result.paths.paths[i];
    path.reserve(t_s);
    const int slot = result.assignment.target_of[i];
    for (int k = 0; k < t_s; ++k) {
      const FormationConfig& fc =
          result.winner.configs[std::min<std::size_t>(k, result.winner.configs.size() - 1)];
      path.push_back(fc.center + fc.scale * (*fc.shape)[slot]);
    }
  }

  const Eigen::Vector3d first_seg = result.winner.configs.front().center - c0;
  if (first_seg.norm() > 1e-12) {
    result.first_direction = first_seg.normalized();
  } else {
    result.first_direction = prev_direction;
  }
  return result;
}

}  // namespace formflight
