#include "formflight/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "formflight/rng.hpp"

namespace formflight {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_spec(const ScenarioSpec& spec) {
  if (!(spec.extent.array() > 0.0).all()) throw std::invalid_argument("scenario: extent must be positive");
  if (spec.resolution <= 0.0) throw std::invalid_argument("scenario: resolution must be positive");
  if (spec.obstacle_count < 0) throw std::invalid_argument("scenario: obstacle_count must be >= 0");
  if (spec.pillar_radius_min <= 0.0 || spec.pillar_radius_max < spec.pillar_radius_min)
    throw std::invalid_argument("scenario: pillar radius range is empty");
  if (spec.corridor_width < 0.0) throw std::invalid_argument("scenario: corridor_width must be >= 0");
}

OccupancyGrid empty_grid(const ScenarioSpec& spec) {
  OccupancyGrid g;
  g.origin = Eigen::Vector3d::Zero();
  g.resolution = spec.resolution;
  for (int a = 0; a < 3; ++a) {
    g.dims[a] = std::max(1, static_cast<int>(std::ceil(spec.extent[a] / spec.resolution - 1e-9)));
  }
  g.cells.assign(g.cell_count(), 0);
  return g;
}

// Squared distance transform of one scan line (lower envelope of parabolas).
// f holds squared distances in cell units; exact for integer-valued input.
void dt_line(const double* f, int n, double* d, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + static_cast<double>(q) * q) -
                (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
               (2.0 * q - 2.0 * v[k]);
    while (k > 0 && s <= z[k]) {
      --k;
      s = ((f[q] + static_cast<double>(q) * q) -
           (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
          (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

void write_u32(std::ostream& out, std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("grid stream truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  std::uint8_t b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("grid stream truncated");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

CorridorWalls corridor_walls(const ScenarioSpec& spec) {
  CorridorWalls w;
  w.x_lo = spec.extent.x() / 3.0;
  w.x_hi = 2.0 * spec.extent.x() / 3.0;
  w.y_lo = spec.extent.y() / 2.0 - spec.corridor_width / 2.0;
  w.y_hi = spec.extent.y() / 2.0 + spec.corridor_width / 2.0;
  return w;
}

std::vector<Pillar> sample_pillars(const ScenarioSpec& spec) {
  validate_spec(spec);
  std::vector<Pillar> pillars;
  if (spec.kind != ScenarioKind::PillarField) return pillars;
  pillars.reserve(spec.obstacle_count);
  auto rng = make_rng(spec.seed, 0x5C); // scenario stream
  const Eigen::Vector2d start_xy = spec.start.head<2>();
  const Eigen::Vector2d goal_xy = spec.goal.head<2>();
  const long max_attempts = 1000L * std::max(1, spec.obstacle_count);
  long attempts = 0;
  while (static_cast<int>(pillars.size()) < spec.obstacle_count) {
    if (++attempts > max_attempts)
      throw std::runtime_error("scenario: could not place pillars clear of start/goal");
    Pillar p;
    // Fixed draw order per attempt: x, y, radius.
    p.center.x() = uniform_in(rng, 0.0, spec.extent.x());
    p.center.y() = uniform_in(rng, 0.0, spec.extent.y());
    p.radius = uniform_in(rng, spec.pillar_radius_min, spec.pillar_radius_max);
    if ((p.center - start_xy).norm() < spec.clearance_radius + p.radius) continue;
    if ((p.center - goal_xy).norm() < spec.clearance_radius + p.radius) continue;
    pillars.push_back(p);
  }
  return pillars;
}

OccupancyGrid generate_scenario(const ScenarioSpec& spec) {
  validate_spec(spec);
  OccupancyGrid g = empty_grid(spec);

  if (spec.kind == ScenarioKind::PillarField) {
    const auto pillars = sample_pillars(spec);
    for (const auto& p : pillars) {
      const int ix_lo = std::max(0, static_cast<int>(std::floor((p.center.x() - p.radius) / g.resolution)) - 1);
      const int ix_hi = std::min(g.dims[0] - 1, static_cast<int>(std::ceil((p.center.x() + p.radius) / g.resolution)) + 1);
      const int iy_lo = std::max(0, static_cast<int>(std::floor((p.center.y() - p.radius) / g.resolution)) - 1);
      const int iy_hi = std::min(g.dims[1] - 1, static_cast<int>(std::ceil((p.center.y() + p.radius) / g.resolution)) + 1);
      for (int ix = ix_lo; ix <= ix_hi; ++ix) {
        for (int iy = iy_lo; iy <= iy_hi; ++iy) {
          const Eigen::Vector2d c = g.cell_center(ix, iy, 0).head<2>();
          if ((c - p.center).norm() <= p.radius) {
            for (int iz = 0; iz < g.dims[2]; ++iz) g.cells[g.index(ix, iy, iz)] = 1;
          }
        }
      }
    }
  } else {
    const CorridorWalls w = corridor_walls(spec);
    for (int ix = 0; ix < g.dims[0]; ++ix) {
      for (int iy = 0; iy < g.dims[1]; ++iy) {
        const Eigen::Vector3d c = g.cell_center(ix, iy, 0);
        const bool wall = c.x() >= w.x_lo && c.x() <= w.x_hi && (c.y() < w.y_lo || c.y() > w.y_hi);
        if (wall) {
          for (int iz = 0; iz < g.dims[2]; ++iz) g.cells[g.index(ix, iy, iz)] = 1;
        }
      }
    }
  }

  if (g.occupied_at(spec.start) || g.occupied_at(spec.goal))
    throw std::runtime_error("scenario: start or goal generated inside an obstacle");
  return g;
}

DistanceField build_edt(const OccupancyGrid& grid, double d_cap) {
  if (d_cap <= 0.0) throw std::invalid_argument("build_edt: d_cap must be positive");
  const int nx = grid.dims[0], ny = grid.dims[1], nz = grid.dims[2];
  DistanceField f;
  f.origin = grid.origin;
  f.resolution = grid.resolution;
  f.dims = grid.dims;
  f.d_cap = d_cap;
  f.values.assign(grid.cell_count(), 0.0);

  // Squared distances in cell units, transformed one axis at a time. Free
  // cells start at a huge finite value instead of infinity so the envelope
  // arithmetic in dt_line stays NaN-free; anything this large caps to d_cap.
  constexpr double kFree = 1e30;
  std::vector<double> sq(grid.cell_count());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = grid.cells[i] ? 0.0 : kFree;

  const int nmax = std::max({nx, ny, nz});
  std::vector<double> line(nmax), out(nmax), z(nmax + 1);
  std::vector<int> v(nmax);

  // z axis (contiguous)
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy) {
      double* col = &sq[grid.index(ix, iy, 0)];
      dt_line(col, nz, out.data(), v.data(), z.data());
      std::copy(out.begin(), out.begin() + nz, col);
    }
  // y axis
  for (int ix = 0; ix < nx; ++ix)
    for (int iz = 0; iz < nz; ++iz) {
      for (int iy = 0; iy < ny; ++iy) line[iy] = sq[grid.index(ix, iy, iz)];
      dt_line(line.data(), ny, out.data(), v.data(), z.data());
      for (int iy = 0; iy < ny; ++iy) sq[grid.index(ix, iy, iz)] = out[iy];
    }
  // x axis
  for (int iy = 0; iy < ny; ++iy)
    for (int iz = 0; iz < nz; ++iz) {
      for (int ix = 0; ix < nx; ++ix) line[ix] = sq[grid.index(ix, iy, iz)];
      dt_line(line.data(), nx, out.data(), v.data(), z.data());
      for (int ix = 0; ix < nx; ++ix) sq[grid.index(ix, iy, iz)] = out[ix];
    }

  for (std::size_t i = 0; i < sq.size(); ++i) {
    f.values[i] = std::min(d_cap, std::sqrt(sq[i]) * grid.resolution);
  }
  return f;
}

double query_distance(const DistanceField& field, const Eigen::Vector3d& p) {
  if (field.values.empty()) throw std::invalid_argument("query_distance: empty field");
  int i0[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double u = (p[a] - field.origin[a]) / field.resolution - 0.5;
    double fl = std::floor(u);
    double fr = u - fl;
    int i = static_cast<int>(fl);
    // Clamp to the boundary cells; outside queries flatten to the edge value.
    if (i < 0) { i = 0; fr = 0.0; }
    if (i > field.dims[a] - 2) { i = std::max(0, field.dims[a] - 2); fr = (field.dims[a] == 1) ? 0.0 : 1.0; }
    if (field.dims[a] == 1) { i = 0; fr = 0.0; }
    i0[a] = i;
    frac[a] = std::clamp(fr, 0.0, 1.0);
  }
  auto at = [&](int dx, int dy, int dz) {
    const int ix = std::min(i0[0] + dx, field.dims[0] - 1);
    const int iy = std::min(i0[1] + dy, field.dims[1] - 1);
    const int iz = std::min(i0[2] + dz, field.dims[2] - 1);
    return field.values[field.index(ix, iy, iz)];
  };
  double c00 = at(0, 0, 0) * (1 - frac[2]) + at(0, 0, 1) * frac[2];
  double c01 = at(0, 1, 0) * (1 - frac[2]) + at(0, 1, 1) * frac[2];
  double c10 = at(1, 0, 0) * (1 - frac[2]) + at(1, 0, 1) * frac[2];
  double c11 = at(1, 1, 0) * (1 - frac[2]) + at(1, 1, 1) * frac[2];
  double c0 = c00 * (1 - frac[1]) + c01 * frac[1];
  double c1 = c10 * (1 - frac[1]) + c11 * frac[1];
  return c0 * (1 - frac[0]) + c1 * frac[0];
}

void write_grid(const OccupancyGrid& grid, std::ostream& out) {
  for (int a = 0; a < 3; ++a) write_u32(out, static_cast<std::uint32_t>(grid.dims[a]));
  write_f64(out, grid.resolution);
  for (int a = 0; a < 3; ++a) write_f64(out, grid.origin[a]);
  out.write(reinterpret_cast<const char*>(grid.cells.data()),
            static_cast<std::streamsize>(grid.cells.size()));
  if (!out) throw std::runtime_error("grid write failed");
}

OccupancyGrid read_grid(std::istream& in) {
  OccupancyGrid g;
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t d = read_u32(in);
    if (d == 0 || d > 100000u) throw std::runtime_error("grid header: bad dimension");
    g.dims[a] = static_cast<int>(d);
  }
  g.resolution = read_f64(in);
  if (!(g.resolution > 0.0)) throw std::runtime_error("grid header: bad resolution");
  for (int a = 0; a < 3; ++a) g.origin[a] = read_f64(in);
  g.cells.assign(g.cell_count(), 0);
  in.read(reinterpret_cast<char*>(g.cells.data()), static_cast<std::streamsize>(g.cells.size()));
  if (!in) throw std::runtime_error("grid body truncated");
  for (auto c : g.cells)
    if (c > 1) throw std::runtime_error("grid body: cell bytes must be 0 or 1");
  return g;
}

void write_grid_file(const OccupancyGrid& grid, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  write_grid(grid, out);
}

OccupancyGrid read_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  return read_grid(in);
}

}  // namespace formflight
