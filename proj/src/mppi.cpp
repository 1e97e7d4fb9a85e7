#include "formflight/mppi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "formflight/rng.hpp"
#include "formflight/world.hpp"

namespace formflight {

double wrap_angle(double a) {
  double y = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (y <= 0.0) y += 2.0 * std::numbers::pi;
  return y - std::numbers::pi;
}

UavState propagate(const UavState& x, const ControlInput& u, double dt) {
  UavState next;
  next.p = x.p + x.v * dt;
  next.v = x.v + x.a * dt;
  next.a = x.a + u.jerk * dt;
  next.psi = wrap_angle(x.psi + u.psi_rate * dt);
  return next;
}

Eigen::Vector3d Trajectory::sample_position(double t) const {
  if (states.size() < 2) return states.empty() ? Eigen::Vector3d::Zero() : states.front().p;
  const double rel = std::clamp((t - t0) / dt, 0.0, static_cast<double>(controls.size()));
  int k = std::min(static_cast<int>(rel), static_cast<int>(controls.size()) - 1);
  const double s = rel - k;
  const UavState& x0 = states[k];
  const UavState& x1 = states[k + 1];
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  return h00 * x0.p + h10 * dt * x0.v + h01 * x1.p + h11 * dt * x1.v;
}

double running_cost(const UavState& x, const ControlInput& u, int k, const RolloutContext& ctx) {
  if (k < 0 || k >= static_cast<int>(ctx.waypoints.size()))
    throw std::invalid_argument("running_cost: step index outside the waypoint horizon");
  const RunningCostParams& pc = ctx.cost;

  double cost = pc.k_f * (x.p - ctx.waypoints[k]).norm();

  if (x.v.norm() >= pc.v_max || x.a.norm() >= pc.a_max) cost += pc.k_dyn;

  cost += pc.k_smo * (u.jerk.squaredNorm() + u.psi_rate * u.psi_rate) * ctx.dt;

  if (ctx.field) {
    const double d = query_distance(*ctx.field, x.p);
    if (d < pc.d_obs_min) {
      cost += pc.k_obs;
    } else if (d <= pc.d_obs_max) {
      cost += pc.k_obs * std::pow((pc.d_obs_max - d) / (pc.d_obs_max - pc.d_obs_min), pc.beta);
    }
  }

  for (const auto& neighbor : ctx.neighbors) {
    Eigen::Vector3d diff = x.p - neighbor[k];
    diff.z() *= pc.downwash_lambda;
    const double d = diff.norm();
    if (d < pc.d_mut_min) {
      cost += pc.k_mut;
    } else if (d <= pc.d_mut_max) {
      cost += pc.k_mut * std::pow((pc.d_mut_max - d) / (pc.d_mut_max - pc.d_mut_min), pc.alpha);
    }
  }
  return cost;
}

std::vector<double> compute_mppi_weights(const std::vector<double>& costs, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("mppi weights: lambda must be positive");
  std::vector<double> weights(costs.size(), 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (double c : costs)
    if (std::isfinite(c) && c < best) best = c;
  if (!std::isfinite(best)) return weights;  // no usable rollout
  double norm = 0.0;
  for (std::size_t m = 0; m < costs.size(); ++m) {
    if (std::isfinite(costs[m])) {
      weights[m] = std::exp(-(costs[m] - best) / lambda);
      norm += weights[m];
    }
  }
  for (double& w : weights) w /= norm;
  return weights;
}

std::vector<ControlInput> shift_horizon(const std::vector<ControlInput>& seq,
                                        const ControlInput& u_init) {
  if (seq.empty()) return {};
  std::vector<ControlInput> shifted(seq.begin() + 1, seq.end());
  shifted.push_back(u_init);
  return shifted;
}

MppiStepResult mppi_step(const UavState& x0, const std::vector<ControlInput>& nominal,
                         const RolloutContext& ctx, const MppiParams& params,
                         std::uint64_t nonce, MppiDiagnostics* diag) {
  if (params.rollouts < 1 || params.horizon < 1)
    throw std::invalid_argument("mppi_step: rollouts and horizon must be positive");
  if (!(params.dt > 0.0)) throw std::invalid_argument("mppi_step: dt must be positive");
  if (static_cast<int>(nominal.size()) != params.horizon)
    throw std::invalid_argument("mppi_step: nominal length must equal the horizon");
  if (static_cast<int>(ctx.waypoints.size()) < params.horizon)
    throw std::invalid_argument("mppi_step: not enough waypoints for the horizon");
  for (const auto& nb : ctx.neighbors)
    if (static_cast<int>(nb.size()) < params.horizon)
      throw std::invalid_argument("mppi_step: neighbor track shorter than the horizon");

  Eigen::LLT<Eigen::Matrix4d> llt(params.sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("mppi_step: sigma must be positive definite");
  const Eigen::Matrix4d chol = llt.matrixL();

  const int r = params.rollouts;
  const int p = params.horizon;
  std::vector<Eigen::Vector4d> noise(static_cast<std::size_t>(r) * p);
  std::vector<double> costs(r);

  for (int m = 0; m < r; ++m) {
    // Independent substream per rollout; execution order is irrelevant.
    auto rng = make_rng(params.seed, 0x4011, nonce, static_cast<std::uint64_t>(m));
    UavState x = x0;
    double s_cost = 0.0;
    for (int k = 0; k < p; ++k) {
      Eigen::Vector4d z(gaussian(rng), gaussian(rng), gaussian(rng), gaussian(rng));
      const Eigen::Vector4d v = chol * z;
      noise[static_cast<std::size_t>(m) * p + k] = v;
      ControlInput u;
      u.jerk = nominal[k].jerk + v.head<3>();
      u.psi_rate = nominal[k].psi_rate + v[3];
      x = propagate(x, u, params.dt);
      s_cost += running_cost(x, u, k, ctx) * params.dt;
      if (!std::isfinite(s_cost)) break;
    }
    costs[m] = s_cost + params.cost_shift;
  }

  const std::vector<double> weights = compute_mppi_weights(costs, params.lambda);

  std::vector<ControlInput> updated(nominal);
  for (int k = 0; k < p; ++k) {
    Eigen::Vector4d delta = Eigen::Vector4d::Zero();
    for (int m = 0; m < r; ++m) {
      delta += weights[m] * noise[static_cast<std::size_t>(m) * p + k];
    }
    updated[k].jerk += delta.head<3>();
    updated[k].psi_rate += delta[3];
  }

  MppiStepResult result;
  result.trajectory.t0 = 0.0;
  result.trajectory.dt = params.dt;
  result.trajectory.states.reserve(p + 1);
  result.trajectory.states.push_back(x0);
  for (int k = 0; k < p; ++k)
    result.trajectory.states.push_back(propagate(result.trajectory.states.back(), updated[k], params.dt));
  result.trajectory.controls = updated;
  result.next_nominal = shift_horizon(updated);

  if (diag) {
    diag->costs = std::move(costs);
    diag->weights = weights;
  }
  return result;
}

MppiController::MppiController(MppiParams params) : params_(std::move(params)) {
  nominal_.assign(params_.horizon, ControlInput{});
}

Trajectory MppiController::step(const UavState& x0, const RolloutContext& ctx) {
  MppiStepResult result = mppi_step(x0, nominal_, ctx, params_, calls_++);
  nominal_ = std::move(result.next_nominal);
  return std::move(result.trajectory);
}

}  // namespace formflight
