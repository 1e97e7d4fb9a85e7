#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

namespace formflight {

// Desired relative positions of the formation, canonical form: centroid at the
// origin. Entry j is "slot" j; an assignment maps UAV index to slot index.
using FormationShape = std::vector<Eigen::Vector3d>;

// A formation configuration is the shape placed in the world: scale s and
// center c over a shared shape. Orientation is fixed (shape coordinates are
// world-aligned).
struct FormationConfig {
  double scale = 1.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  std::shared_ptr<const FormationShape> shape;
};

// Target of slot j: center + scale * shape[j].
std::vector<Eigen::Vector3d> formation_targets(const FormationConfig& fc);

}  // namespace formflight
