#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace formflight {

enum class ScenarioKind { PillarField, Corridor };

// Everything needed to rebuild a world deterministically from one seed.
// Worlds span [0, extent] on each axis; obstacles are z-extruded columns or
// wall slabs, so the horizontal layout decides everything.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::PillarField;
  Eigen::Vector3d extent{50.0, 40.0, 3.0};
  double resolution = 0.2;
  int obstacle_count = 150;         // pillar fields only
  double pillar_radius_min = 0.25;
  double pillar_radius_max = 0.5;
  double corridor_width = 2.5;      // corridor worlds only
  double clearance_radius = 4.0;    // pillar-free discs around start and goal
  std::uint64_t seed = 1;
  Eigen::Vector3d start{4.0, 20.0, 1.5};
  Eigen::Vector3d goal{46.0, 20.0, 1.5};
};

struct Pillar {
  Eigen::Vector2d center;
  double radius;
};

// Wall slabs of a corridor world: occupied where x in [x_lo, x_hi] and
// y outside (y_lo, y_hi). The slabs cover the central third of the x extent,
// leaving open staging areas on both sides of the squeeze.
struct CorridorWalls {
  double x_lo, x_hi;
  double y_lo, y_hi;
};
CorridorWalls corridor_walls(const ScenarioSpec& spec);

struct OccupancyGrid {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double resolution = 0.2;
  std::array<int, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> cells;  // layout: (ix * dims[1] + iy) * dims[2] + iz

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz;
  }
  bool in_bounds(int ix, int iy, int iz) const {
    return ix >= 0 && iy >= 0 && iz >= 0 && ix < dims[0] && iy < dims[1] && iz < dims[2];
  }
  bool occupied(int ix, int iy, int iz) const { return cells[index(ix, iy, iz)] != 0; }
  Eigen::Vector3d cell_center(int ix, int iy, int iz) const {
    return origin + resolution * Eigen::Vector3d(ix + 0.5, iy + 0.5, iz + 0.5);
  }
  std::array<int, 3> cell_of(const Eigen::Vector3d& p) const {
    return {static_cast<int>(std::floor((p.x() - origin.x()) / resolution)),
            static_cast<int>(std::floor((p.y() - origin.y()) / resolution)),
            static_cast<int>(std::floor((p.z() - origin.z()) / resolution))};
  }
  Eigen::Vector3d min_corner() const { return origin; }
  Eigen::Vector3d max_corner() const {
    return origin + resolution * Eigen::Vector3d(dims[0], dims[1], dims[2]);
  }
  // Out-of-bounds points count as occupied: nothing may plan through the
  // world boundary.
  bool occupied_at(const Eigen::Vector3d& p) const {
    const auto c = cell_of(p);
    if (!in_bounds(c[0], c[1], c[2])) return true;
    return occupied(c[0], c[1], c[2]);
  }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
};

// Clamped Euclidean distance (meters) from each cell center to the nearest
// occupied cell center. Occupied cells hold 0.
struct DistanceField {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double resolution = 0.2;
  std::array<int, 3> dims{0, 0, 0};
  double d_cap = 5.0;
  std::vector<double> values;

  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(ix) * dims[1] + iy) * dims[2] + iz;
  }
};

// Deterministic pillar layout for a pillar-field spec. Throws if rejection
// sampling cannot place a pillar clear of the start/goal discs.
std::vector<Pillar> sample_pillars(const ScenarioSpec& spec);

OccupancyGrid generate_scenario(const ScenarioSpec& spec);

// Exact Euclidean distance transform (separable parabola envelopes), clamped
// at d_cap. Matches the all-pairs brute force at every cell.
DistanceField build_edt(const OccupancyGrid& grid, double d_cap);

// Trilinear interpolation over cell-center samples; queries outside the grid
// clamp to the boundary cells.
double query_distance(const DistanceField& field, const Eigen::Vector3d& p);

// Binary grid exchange format. Little-endian header (dims as u32 x3,
// resolution f64, origin f64 x3) followed by row-major cell bytes.
void write_grid(const OccupancyGrid& grid, std::ostream& out);
OccupancyGrid read_grid(std::istream& in);
void write_grid_file(const OccupancyGrid& grid, const std::string& path);
OccupancyGrid read_grid_file(const std::string& path);

}  // namespace formflight
