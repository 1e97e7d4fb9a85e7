#include "formflight/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace formflight::oracles {

DistanceField brute_force_edt(const OccupancyGrid& grid, double d_cap) {
  if (!(d_cap > 0.0)) throw std::invalid_argument("brute_force_edt: d_cap must be positive");
  DistanceField field;
  field.origin = grid.origin;
  field.resolution = grid.resolution;
  field.dims[0] = grid.dims[0];
  field.dims[1] = grid.dims[1];
  field.dims[2] = grid.dims[2];
  field.d_cap = d_cap;
  field.values.assign(grid.cells.size(), d_cap);

  std::vector<std::array<int, 3>> occupied;
  for (int ix = 0; ix < grid.dims[0]; ++ix)
    for (int iy = 0; iy < grid.dims[1]; ++iy)
      for (int iz = 0; iz < grid.dims[2]; ++iz)
        if (grid.occupied(ix, iy, iz)) occupied.push_back({ix, iy, iz});
  if (occupied.empty()) return field;

  for (int ix = 0; ix < grid.dims[0]; ++ix) {
    for (int iy = 0; iy < grid.dims[1]; ++iy) {
      for (int iz = 0; iz < grid.dims[2]; ++iz) {
        double best_sq = std::numeric_limits<double>::infinity();
        for (const auto& o : occupied) {
          const double dx = ix - o[0];
          const double dy = iy - o[1];
          const double dz = iz - o[2];
          best_sq = std::min(best_sq, dx * dx + dy * dy + dz * dz);
        }
        field.values[grid.index(ix, iy, iz)] = std::min(d_cap, std::sqrt(best_sq) * grid.resolution);
      }
    }
  }
  return field;
}

Assignment brute_force_assignment(const Eigen::MatrixXd& costs) {
  const int n = static_cast<int>(costs.rows());
  if (n < 1 || costs.cols() != n) throw std::invalid_argument("brute_force_assignment: square matrix required");
  if (n > 9) throw std::invalid_argument("brute_force_assignment: too many agents");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best;
  best.total_cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += costs(i, perm[i]);
    if (total < best.total_cost) {
      best.total_cost = total;
      best.target_of = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

FcCostTerms recode_front_cost(const FormationConfig& fc, const FcEvalContext& ctx,
                              const FrontWeights& weights) {
  if (!fc.shape || !ctx.region || !ctx.positions || !ctx.d_obs || !ctx.temp_assignment)
    throw std::invalid_argument("recode_front_cost: incomplete context");
  const std::vector<Eigen::Vector3d> targets = formation_targets(fc);
  const std::size_t n = ctx.positions->size();
  if (targets.size() != n) throw std::invalid_argument("recode_front_cost: size mismatch");

  FcCostTerms t;
  t.goal = weights.k_g * std::sqrt((fc.center - ctx.goal_center).squaredNorm());
  t.scale = weights.k_s * std::abs(fc.scale - weights.s_des);

  const double d_sum = std::accumulate(ctx.d_obs->begin(), ctx.d_obs->end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d& target = targets[(*ctx.temp_assignment)[i]];
    const auto& poly = ctx.region->polytopes[i];
    bool inside = true;
    for (Eigen::Index f = 0; f < poly.normals.rows(); ++f)
      inside = inside && poly.normals.row(f).dot(target) <= poly.offsets(f) + 1e-9;
    if (!inside) t.safe += weights.k_safe;
    if ((*ctx.d_obs)[i] > weights.d_risk && d_sum > 0.0)
      t.risk += ((*ctx.d_obs)[i] / d_sum) * (target - (*ctx.positions)[i]).norm();
  }

  t.continuity = weights.k_sc * std::abs(fc.scale - ctx.prev_scale);
  if (ctx.prev_direction) {
    const Eigen::Vector3d seg = fc.center - ctx.prev_center;
    if (seg.norm() > 1e-12) {
      const double c = std::clamp(seg.normalized().dot(*ctx.prev_direction), -1.0, 1.0);
      t.continuity += weights.k_ac * std::acos(c);
    }
  }
  return t;
}

double recode_running_cost(const UavState& x, const ControlInput& u, int k,
                           const RolloutContext& ctx) {
  if (k < 0 || k >= static_cast<int>(ctx.waypoints.size()))
    throw std::invalid_argument("recode_running_cost: bad step index");
  const RunningCostParams& pc = ctx.cost;
  double total = 0.0;

  total += pc.k_f * (x.p - ctx.waypoints[k]).norm();

  const double speed = std::sqrt(x.v.x() * x.v.x() + x.v.y() * x.v.y() + x.v.z() * x.v.z());
  const double accel = std::sqrt(x.a.x() * x.a.x() + x.a.y() * x.a.y() + x.a.z() * x.a.z());
  if (!(speed < pc.v_max) || !(accel < pc.a_max)) total += pc.k_dyn;

  total += pc.k_smo * ctx.dt *
           (u.jerk.x() * u.jerk.x() + u.jerk.y() * u.jerk.y() + u.jerk.z() * u.jerk.z() +
            u.psi_rate * u.psi_rate);

  if (ctx.field != nullptr) {
    const double d = query_distance(*ctx.field, x.p);
    if (d < pc.d_obs_min) total += pc.k_obs;
    else if (d <= pc.d_obs_max) {
      const double frac = (pc.d_obs_max - d) / (pc.d_obs_max - pc.d_obs_min);
      total += pc.k_obs * std::pow(frac, pc.beta);
    }
  }

  for (const auto& neighbor : ctx.neighbors) {
    const Eigen::Vector3d q = neighbor[k];
    const double dx = x.p.x() - q.x();
    const double dy = x.p.y() - q.y();
    const double dz = (x.p.z() - q.z()) * pc.downwash_lambda;
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (d < pc.d_mut_min) total += pc.k_mut;
    else if (d <= pc.d_mut_max) {
      const double frac = (pc.d_mut_max - d) / (pc.d_mut_max - pc.d_mut_min);
      total += pc.k_mut * std::pow(frac, pc.alpha);
    }
  }
  return total;
}

namespace {

// Residual with the translation eliminated by the per-scale mean.
double scale_objective(const std::vector<Eigen::Vector3d>& p, const FormationShape& q, double s) {
  const std::size_t n = p.size();
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) mean += p[i] - s * q[i];
  mean /= static_cast<double>(n);
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) ssr += (p[i] - s * q[i] - mean).squaredNorm();
  return ssr / (static_cast<double>(n) * s * s);
}

}  // namespace

double similarity_numeric(const std::vector<Eigen::Vector3d>& positions_by_slot,
                          const FormationShape& shape) {
  const std::size_t n = positions_by_slot.size();
  if (n == 0 || n != shape.size())
    throw std::invalid_argument("similarity_numeric: positions/shape size mismatch");

  // Coarse log-spaced sweep over candidate scales, both signs.
  double best_s = 1.0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int sign = -1; sign <= 1; sign += 2) {
    for (int k = 0; k <= 4000; ++k) {
      const double mag = std::pow(10.0, -3.0 + 4.0 * k / 4000.0);  // 1e-3 .. 1e1
      const double s = sign * mag;
      const double val = scale_objective(positions_by_slot, shape, s);
      if (val < best_val) {
        best_val = val;
        best_s = s;
      }
    }
  }

  // Golden-section refinement around the best grid point.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best_s * (best_s > 0 ? 0.9 : 1.1);
  double hi = best_s * (best_s > 0 ? 1.1 : 0.9);
  if (lo > hi) std::swap(lo, hi);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = scale_objective(positions_by_slot, shape, x1);
  double f2 = scale_objective(positions_by_slot, shape, x2);
  for (int it = 0; it < 200 && (b - a) > 1e-14 * std::abs(best_s); ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = scale_objective(positions_by_slot, shape, x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = scale_objective(positions_by_slot, shape, x2);
    }
  }
  const double s_ref = 0.5 * (a + b);
  return std::min(best_val, scale_objective(positions_by_slot, shape, s_ref));
}

}  // namespace formflight::oracles
