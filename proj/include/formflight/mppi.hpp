#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace formflight {

// Flat-output point-mass model: position, velocity, acceleration and yaw,
// driven by jerk and yaw rate.
struct UavState {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  double psi = 0.0;  // wrapped to (-pi, pi]
};

struct ControlInput {
  Eigen::Vector3d jerk = Eigen::Vector3d::Zero();
  double psi_rate = 0.0;
};

double wrap_angle(double a);

// Forward Euler on the linear flat-output model; yaw is wrapped.
UavState propagate(const UavState& x, const ControlInput& u, double dt);

struct MppiParams {
  int rollouts = 1024;
  int horizon = 20;
  double dt = 0.1;
  double lambda = 1.0;
  // Covariance of the (jerk xyz, yaw rate) perturbations.
  Eigen::Matrix4d sigma = Eigen::Vector4d(4.0, 4.0, 4.0, 0.25).asDiagonal();
  // Part of the control-cost definition; realized through the smoothness
  // weight, kept here so configurations carry the full cost statement.
  Eigen::Matrix4d control_weight = 0.05 * Eigen::Matrix4d::Identity();
  std::uint64_t seed = 1;
  // Added to every rollout cost. The baseline subtraction must cancel it,
  // which the tests assert; keep 0 in real use.
  double cost_shift = 0.0;
};

struct RunningCostParams {
  double k_f = 4.0;      // waypoint tracking
  double k_dyn = 1e3;    // fires when a dynamic limit is reached or exceeded
  double v_max = 1.5;
  double a_max = 3.0;
  double k_smo = 0.05;   // control smoothness (u' u dt)
  double k_obs = 500.0;  // obstacle proximity shaping
  double beta = 2.0;
  double d_obs_min = 0.15;
  double d_obs_max = 0.6;
  double k_mut = 1e3;    // inter-UAV proximity shaping
  double alpha = 2.0;
  double d_mut_min = 0.35;
  double d_mut_max = 0.7;
  // z scaling of the mutual-distance metric: < 1 stretches the protected
  // volume vertically (rotor downwash).
  double downwash_lambda = 0.25;
};

// states has horizon + 1 entries and controls has horizon; states[k + 1] is
// exactly propagate(states[k], controls[k], dt).
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.1;
  std::vector<UavState> states;
  std::vector<ControlInput> controls;

  double duration() const { return dt * static_cast<double>(controls.size()); }
  // Cubic Hermite interpolation on (p, v) knots; t clamps to the horizon.
  Eigen::Vector3d sample_position(double t) const;
};

struct DistanceField;

struct RolloutContext {
  // waypoints[k] is the desired position after executing controls 0..k.
  std::span<const Eigen::Vector3d> waypoints;
  const DistanceField* field = nullptr;  // null: no obstacle term
  // neighbors[j][k]: neighbor j's position at step k (time-aligned with the
  // rollout, i.e. its state after step k + 1 of the shared trajectory).
  std::span<const std::vector<Eigen::Vector3d>> neighbors;
  double dt = 0.1;
  RunningCostParams cost;
};

// Stage cost of being in state x after applying u at step k.
double running_cost(const UavState& x, const ControlInput& u, int k, const RolloutContext& ctx);

// Softmax weights over rollout costs relative to the best one. Non-finite
// costs get weight zero; if no cost is finite, all weights are zero.
std::vector<double> compute_mppi_weights(const std::vector<double>& costs, double lambda);

std::vector<ControlInput> shift_horizon(const std::vector<ControlInput>& seq,
                                        const ControlInput& u_init = {});

struct MppiDiagnostics {
  std::vector<double> costs;    // per rollout, after any cost_shift
  std::vector<double> weights;  // matching softmax weights
};

struct MppiStepResult {
  Trajectory trajectory;                   // propagated under the updated controls
  std::vector<ControlInput> next_nominal;  // updated controls shifted one step
};

// One optimization round: sample perturbed rollouts, weight them against the
// best, blend into the nominal sequence, then shift for the next cycle. The
// nonce separates successive calls so each draws fresh noise deterministically.
MppiStepResult mppi_step(const UavState& x0, const std::vector<ControlInput>& nominal,
                         const RolloutContext& ctx, const MppiParams& params,
                         std::uint64_t nonce = 0, MppiDiagnostics* diag = nullptr);

// Stateful per-UAV wrapper: keeps the nominal sequence and the call counter.
class MppiController {
 public:
  explicit MppiController(MppiParams params);

  Trajectory step(const UavState& x0, const RolloutContext& ctx);

  const std::vector<ControlInput>& nominal() const { return nominal_; }
  std::vector<ControlInput>& nominal() { return nominal_; }
  const MppiParams& params() const { return params_; }

 private:
  MppiParams params_;
  std::vector<ControlInput> nominal_;
  std::uint64_t calls_ = 0;
};

}  // namespace formflight
