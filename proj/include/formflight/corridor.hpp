#pragma once

#include <Eigen/Dense>
#include <vector>

#include "formflight/formation_config.hpp"
#include "formflight/world.hpp"

namespace formflight {

// Convex free-space polytope in halfspace form: normals * p <= offsets, with
// unit outward normals and a strictly interior seed point.
struct Polytope {
  Eigen::Matrix<double, Eigen::Dynamic, 3> normals;
  Eigen::VectorXd offsets;
  Eigen::Vector3d seed_point = Eigen::Vector3d::Zero();

  int num_faces() const { return static_cast<int>(normals.rows()); }
};

bool contains(const Polytope& poly, const Eigen::Vector3d& p, double tol = 1e-9);

struct SfcParams {
  double sensing_half_extent = 5.0;
  // Cut planes stop this far short of the targeted occupied cell center.
  double safety_margin = 0.25;
  int face_budget = 30;
  // Shrink-and-retry floor for the sensing box when the budget is exceeded.
  double min_half_extent = 1.0;
};

// Safe-flight-corridor generation around one position: start from the sensing
// box (clipped to the world bounds) and cut hyperplanes toward the nearest
// remaining occupied cell center until none is left inside. Face order:
// +x, -x, +y, -y, +z, -z box faces, then cuts in the order they were made.
// Throws std::invalid_argument if the position is occupied or out of bounds.
Polytope generate_sfc(const Eigen::Vector3d& position, const OccupancyGrid& grid,
                      const SfcParams& params = {});

// One polytope per UAV, indexed like the UAV list.
struct FormationSafeRegion {
  std::vector<Polytope> polytopes;
};

// True when, for every UAV i, both its assigned target in fc_a and in fc_b lie
// inside polytope i. Certifies the straight segment between the two targets:
// both endpoints in one convex free polytope.
bool check_connectivity(const FormationConfig& fc_a, const FormationConfig& fc_b,
                        const FormationSafeRegion& region, const std::vector<int>& assignment);

// Wire layout for leader-bound messages: u32 face count, then per face
// (normal x, y, z, offset) as little-endian f64. The seed point travels
// separately (the sender's reported position).
void encode_polytope(const Polytope& poly, std::vector<std::uint8_t>& out);
Polytope decode_polytope(const std::uint8_t* data, std::size_t size, std::size_t& offset,
                         const Eigen::Vector3d& seed_point);

}  // namespace formflight
