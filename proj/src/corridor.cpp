#include "formflight/corridor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>
#include <stdexcept>

namespace formflight {

namespace {

// Inflation used while collecting cut targets: keeping every occupied cell
// center farther than half a cell diagonal from the polytope guarantees no
// interior point ever lies inside an occupied cell.
double exclusion_margin(const OccupancyGrid& grid) {
  return 0.5 * std::sqrt(3.0) * grid.resolution + 1e-9;
}

struct Face {
  Eigen::Vector3d n;
  double b;
};

Polytope finish(const std::vector<Face>& faces, const Eigen::Vector3d& seed) {
  Polytope poly;
  poly.normals.resize(static_cast<int>(faces.size()), 3);
  poly.offsets.resize(static_cast<int>(faces.size()));
  for (std::size_t i = 0; i < faces.size(); ++i) {
    poly.normals.row(static_cast<int>(i)) = faces[i].n.transpose();
    poly.offsets[static_cast<int>(i)] = faces[i].b;
  }
  poly.seed_point = seed;
  return poly;
}

// One attempt at a given sensing half extent. Returns empty optional when the
// face budget runs out (caller shrinks and retries). budget < 0 disables it.
std::optional<Polytope> try_generate(const Eigen::Vector3d& position, const OccupancyGrid& grid,
                                     const SfcParams& params, double half_extent, int budget) {
  const Eigen::Vector3d world_lo = grid.min_corner();
  const Eigen::Vector3d world_hi = grid.max_corner();
  Eigen::Vector3d lo = (position.array() - half_extent).max(world_lo.array());
  Eigen::Vector3d hi = (position.array() + half_extent).min(world_hi.array());

  std::vector<Face> faces;
  for (int a = 0; a < 3; ++a) {
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    n[a] = 1.0;
    faces.push_back({n, hi[a]});
    faces.push_back({-n, -lo[a]});
  }

  // Occupied cell centers inside the box, scan order fixed for determinism.
  const auto c_lo = grid.cell_of(lo);
  const auto c_hi = grid.cell_of(hi);
  std::vector<Eigen::Vector3d> candidates;
  for (int ix = std::max(0, c_lo[0]); ix <= std::min(grid.dims[0] - 1, c_hi[0]); ++ix)
    for (int iy = std::max(0, c_lo[1]); iy <= std::min(grid.dims[1] - 1, c_hi[1]); ++iy)
      for (int iz = std::max(0, c_lo[2]); iz <= std::min(grid.dims[2] - 1, c_hi[2]); ++iz)
        if (grid.occupied(ix, iy, iz)) candidates.push_back(grid.cell_center(ix, iy, iz));

  const double margin = exclusion_margin(grid);
  auto inside_inflated = [&](const Eigen::Vector3d& o) {
    for (const auto& f : faces)
      if (f.n.dot(o) > f.b + margin) return false;
    return true;
  };
  candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                  [&](const Eigen::Vector3d& o) { return !inside_inflated(o); }),
                   candidates.end());

  int cuts = 0;
  while (!candidates.empty()) {
    if (budget >= 0 && cuts >= budget) return std::nullopt;
    // Nearest remaining target; scan order breaks ties deterministically.
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double d = (candidates[i] - position).norm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const Eigen::Vector3d o = candidates[best];
    const double d = best_d;
    const Eigen::Vector3d n = (o - position) / d;
    // Plane at safety_margin short of the obstacle; never past half the
    // distance, so the seed stays strictly interior even in tight spots.
    const double cut_dist = std::max(d - params.safety_margin, 0.5 * d);
    const double b = n.dot(position) + cut_dist;
    faces.push_back({n, b});
    ++cuts;

    std::vector<Eigen::Vector3d> kept;
    kept.reserve(candidates.size());
    for (const auto& c : candidates) {
      if (c == o) continue;  // always retire the target, even when d < 2*margin
      if (n.dot(c) <= b + margin) kept.push_back(c);
    }
    candidates.swap(kept);
  }
  return finish(faces, position);
}

void write_f64_le(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

double read_f64_le(const std::uint8_t* data, std::size_t size, std::size_t& offset) {
  if (offset + 8 > size) throw std::runtime_error("polytope message truncated");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(data[offset + i]) << (8 * i);
  offset += 8;
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

bool contains(const Polytope& poly, const Eigen::Vector3d& p, double tol) {
  return ((poly.normals * p - poly.offsets).array() <= tol).all();
}

Polytope generate_sfc(const Eigen::Vector3d& position, const OccupancyGrid& grid,
                      const SfcParams& params) {
  const auto cell = grid.cell_of(position);
  if (!grid.in_bounds(cell[0], cell[1], cell[2]))
    throw std::invalid_argument("generate_sfc: position outside the world");
  if (grid.occupied(cell[0], cell[1], cell[2]))
    throw std::invalid_argument("generate_sfc: position inside an occupied cell");

  double h = params.sensing_half_extent;
  while (h >= params.min_half_extent) {
    if (auto poly = try_generate(position, grid, params, h, params.face_budget)) return *poly;
    h *= 0.5;
  }
  // At the floor extent soundness wins over the face budget.
  auto poly = try_generate(position, grid, params, params.min_half_extent, -1);
  return *poly;
}

bool check_connectivity(const FormationConfig& fc_a, const FormationConfig& fc_b,
                        const FormationSafeRegion& region, const std::vector<int>& assignment) {
  const auto targets_a = formation_targets(fc_a);
  const auto targets_b = formation_targets(fc_b);
  if (assignment.size() != region.polytopes.size()) return false;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int j = assignment[i];
    if (j < 0 || j >= static_cast<int>(targets_a.size())) return false;
    if (!contains(region.polytopes[i], targets_a[j])) return false;
    if (!contains(region.polytopes[i], targets_b[j])) return false;
  }
  return true;
}

void encode_polytope(const Polytope& poly, std::vector<std::uint8_t>& out) {
  const std::uint32_t n = static_cast<std::uint32_t>(poly.num_faces());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  for (int r = 0; r < poly.num_faces(); ++r) {
    for (int a = 0; a < 3; ++a) write_f64_le(out, poly.normals(r, a));
    write_f64_le(out, poly.offsets[r]);
  }
}

Polytope decode_polytope(const std::uint8_t* data, std::size_t size, std::size_t& offset,
                         const Eigen::Vector3d& seed_point) {
  if (offset + 4 > size) throw std::runtime_error("polytope message truncated");
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= static_cast<std::uint32_t>(data[offset + i]) << (8 * i);
  offset += 4;
  if (n < 4 || n > 100000u) throw std::runtime_error("polytope message: bad face count");
  Polytope poly;
  poly.normals.resize(static_cast<int>(n), 3);
  poly.offsets.resize(static_cast<int>(n));
  for (std::uint32_t r = 0; r < n; ++r) {
    for (int a = 0; a < 3; ++a) poly.normals(static_cast<int>(r), a) = read_f64_le(data, size, offset);
    poly.offsets[static_cast<int>(r)] = read_f64_le(data, size, offset);
  }
  poly.seed_point = seed_point;
  return poly;
}

}  // namespace formflight
