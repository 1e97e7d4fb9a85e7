#pragma once

#include <vector>

#include <Eigen/Dense>

#include "formflight/assignment.hpp"
#include "formflight/formation_front.hpp"
#include "formflight/mppi.hpp"
#include "formflight/swarm_sim.hpp"
#include "formflight/world.hpp"

// Slow reference implementations, written independently of the production
// paths so a transcription slip in either side shows up as a mismatch. Used
// by the test suites and the CLI oracle-check mode; never by the simulator.
namespace formflight::oracles {

// All-pairs scan instead of the separable transform.
DistanceField brute_force_edt(const OccupancyGrid& grid, double d_cap);

// Exhaustive minimum over all permutations. Refuses more than 9 agents.
Assignment brute_force_assignment(const Eigen::MatrixXd& costs);

// Term-by-term recomputation of the formation-configuration cost.
FcCostTerms recode_front_cost(const FormationConfig& fc, const FcEvalContext& ctx,
                              const FrontWeights& weights);

// Recomputation of the rollout stage cost.
double recode_running_cost(const UavState& x, const ControlInput& u, int k,
                           const RolloutContext& ctx);

// Formation-similarity via numeric scale search (mean-based translation,
// log-grid plus golden-section over the scale) instead of the closed form.
double similarity_numeric(const std::vector<Eigen::Vector3d>& positions_by_slot,
                          const FormationShape& shape);

}  // namespace formflight::oracles
