#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "formflight/assignment.hpp"
#include "formflight/corridor.hpp"
#include "formflight/formation_config.hpp"

namespace formflight {

// Sampling-based front end: the leader grows candidate formation-configuration
// sequences toward the goal, scores them, and turns the cheapest safe one into
// per-UAV waypoint paths.

struct SampleParams {
  // Hemisphere radius lower bound; r = (1 + gamma) * r_min. Per planning step
  // the center advances r / dt, so keep (1 + gamma_max) * r_min / dt under the
  // vehicle speed limit or the formation shears apart chasing its guidance.
  double r_min = 0.07;
  double gamma_max = 1.0;    // gamma ~ U[0, gamma_max]
  double s_min = 0.4;
  double s_max = 1.2;
  int scale_samples = 7;     // uniform grid over [s_min, s_max]
  int num_sequences = 64;    // candidate sequences per planning call
  int steps_per_sequence = 20;  // must match the trajectory-optimizer horizon
  // After the first step a sequence keeps its heading, jittered by an
  // isotropic Gaussian of this strength. The continuity cost already prefers
  // small step-to-step angles; sampling with the same preference is what
  // lets coherent detours around obstacles appear among the candidates at
  // all — independent per-step draws almost never survive a narrow passage.
  double direction_jitter = 0.6;
  std::uint64_t seed = 1;
};

struct FrontWeights {
  double k_g = 2.0;     // goal-distance weight
  double k_s = 1.0;     // scale-preference weight
  double k_safe = 1e6;  // per-UAV penalty for a target outside its polytope
  double k_sc = 1.0;    // scale-continuity weight
  double k_ac = 0.5;    // direction-continuity weight (radians)
  double d_risk = 0.6;  // obstacle-distance threshold for the risk weighting
  double s_des = 1.0;
  // Tax per missing step of a halted sequence, added on top of the cost of
  // parking at its final config for the remainder of the horizon. Kept near
  // zero on purpose: it only breaks ties toward sequences that keep their
  // options open. Anything heavier makes short advancing stubs lose to
  // full-length loiters, which is exactly backwards in a tight passage
  // where stubs are how the swarm inches forward at all.
  double suspend_penalty_per_step = 0.25;
  double k_tabu = 50.0;      // repulsion from recently jammed centers
  double tabu_radius = 2.5;  // lateral reach of that repulsion
};

struct FcCostTerms {
  double goal = 0.0;
  double scale = 0.0;
  double safe = 0.0;
  double risk = 0.0;
  double continuity = 0.0;
  double tabu = 0.0;
  double total() const { return goal + scale + safe + risk + continuity + tabu; }
};

struct FcEvalContext {
  Eigen::Vector3d goal_center = Eigen::Vector3d::Zero();
  const FormationSafeRegion* region = nullptr;
  const std::vector<Eigen::Vector3d>* positions = nullptr;  // current UAV positions
  const std::vector<double>* d_obs = nullptr;               // per-UAV obstacle clearance
  const std::vector<int>* temp_assignment = nullptr;        // UAV -> slot, from the last cycle
  // Centers the swarm recently jammed at. Cost rises linearly toward k_tabu
  // inside tabu_radius of each (lateral distance only; jams are between
  // vertical obstacles), steering replans around ground already proven bad.
  const std::vector<Eigen::Vector3d>* tabu = nullptr;
  Eigen::Vector3d prev_center = Eigen::Vector3d::Zero();
  double prev_scale = 1.0;
  // Unit direction of the preceding propagation segment; empty on cold start
  // (the direction-continuity term is then zero).
  std::optional<Eigen::Vector3d> prev_direction;
};

FcCostTerms evaluate_fc_terms(const FormationConfig& fc, const FcEvalContext& ctx,
                              const FrontWeights& weights);
double evaluate_fc(const FormationConfig& fc, const FcEvalContext& ctx,
                   const FrontWeights& weights);

// New center on the forward hemisphere surface around c_prev: radius
// (1 + gamma) * r_min, axis toward c_goal. Returns c_goal when c_prev
// already coincides with it. full_sphere lifts the forward restriction so a
// wedged formation can back out. When persist_dir is given it replaces the
// hemisphere draw entirely: the new direction is persist_dir plus jitter,
// which keeps a growing sequence coherent from one step to the next.
Eigen::Vector3d sample_center(const Eigen::Vector3d& c_prev, const Eigen::Vector3d& c_goal,
                              const SampleParams& params, std::mt19937_64& rng,
                              bool full_sphere = false,
                              const Eigen::Vector3d* persist_dir = nullptr);

std::vector<double> scale_grid(const SampleParams& params);

struct FormationSequence {
  std::vector<FormationConfig> configs;
  double total_cost = 0.0;
  int steps_completed = 0;
};

// paths[i][k]: waypoint k of UAV i; every path has steps_per_sequence entries.
struct GuidancePathSet {
  std::vector<std::vector<Eigen::Vector3d>> paths;
};

struct PlanResult {
  GuidancePathSet paths;
  Assignment assignment;        // UAV -> slot used to emit the paths
  FormationSequence winner;
  std::optional<Eigen::Vector3d> first_direction;  // unit, for the next cycle's continuity term
  bool assignment_fell_back = false;  // auction result failed containment, kept sigma_0
};

// Raised when every candidate sequence halts before its first step; the
// caller holds position and replans next cycle.
struct NoSafeFormationStep : std::runtime_error {
  NoSafeFormationStep() : std::runtime_error("no safe formation step") {}
};

PlanResult plan_formation_paths(const Eigen::Vector3d& c0, double s0,
                                const FormationSafeRegion& region,
                                const std::vector<int>& sigma0,
                                const std::vector<Eigen::Vector3d>& positions,
                                const std::vector<double>& d_obs,
                                const FormationConfig& goal_config,
                                const SampleParams& params, const FrontWeights& weights,
                                std::mt19937_64& rng,
                                const std::optional<Eigen::Vector3d>& prev_direction = {},
                                double assign_epsilon = 1e-6,
                                bool allow_retreat = false,
                                const std::vector<Eigen::Vector3d>* tabu = nullptr);

}  // namespace formflight
