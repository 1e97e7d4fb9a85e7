#include "formflight/wire.hpp"

#include <cstring>
#include <stdexcept>

namespace formflight {
namespace {

constexpr std::uint8_t kTagState = 1;
constexpr std::uint8_t kTagGuidance = 2;
constexpr std::uint8_t kTagTrajectory = 3;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

void put_vec3(std::vector<std::uint8_t>& out, const Eigen::Vector3d& v) {
  put_f64(out, v.x());
  put_f64(out, v.y());
  put_f64(out, v.z());
}

struct Reader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > size) throw std::runtime_error("wire: truncated message");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return data[pos++];
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  Eigen::Vector3d vec3() {
    Eigen::Vector3d v;
    v.x() = f64();
    v.y() = f64();
    v.z() = f64();
    return v;
  }
};

constexpr std::uint32_t kMaxCount = 1u << 20;

void check_count(std::uint32_t n, const char* what) {
  if (n > kMaxCount) throw std::runtime_error(std::string("wire: implausible count for ") + what);
}

void encode_state(std::vector<std::uint8_t>& out, const StateReport& r) {
  put_u32(out, r.uav);
  put_vec3(out, r.position);
  put_f64(out, r.d_obs);
  encode_polytope(r.polytope, out);
}

StateReport decode_state(Reader& rd) {
  StateReport r;
  r.uav = rd.u32();
  r.position = rd.vec3();
  r.d_obs = rd.f64();
  std::size_t off = rd.pos;
  r.polytope = decode_polytope(rd.data, rd.size, off, r.position);
  rd.pos = off;
  return r;
}

void encode_guidance(std::vector<std::uint8_t>& out, const GuidanceBroadcast& g) {
  if (g.assignment.size() != g.waypoints.size())
    throw std::invalid_argument("wire: guidance assignment/waypoints size mismatch");
  put_u32(out, static_cast<std::uint32_t>(g.assignment.size()));
  std::size_t steps = g.waypoints.empty() ? 0 : g.waypoints.front().size();
  for (const auto& path : g.waypoints)
    if (path.size() != steps) throw std::invalid_argument("wire: ragged guidance paths");
  put_u32(out, static_cast<std::uint32_t>(steps));
  for (int slot : g.assignment) {
    if (slot < 0) throw std::invalid_argument("wire: negative slot");
    put_u32(out, static_cast<std::uint32_t>(slot));
  }
  for (const auto& path : g.waypoints)
    for (const auto& p : path) put_vec3(out, p);
}

GuidanceBroadcast decode_guidance(Reader& rd) {
  GuidanceBroadcast g;
  std::uint32_t n = rd.u32();
  std::uint32_t steps = rd.u32();
  check_count(n, "uavs");
  check_count(steps, "steps");
  g.assignment.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) g.assignment[i] = static_cast<int>(rd.u32());
  g.waypoints.assign(n, std::vector<Eigen::Vector3d>(steps));
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t k = 0; k < steps; ++k) g.waypoints[i][k] = rd.vec3();
  return g;
}

void encode_trajectory(std::vector<std::uint8_t>& out, const TrajectoryShare& t) {
  const Trajectory& tr = t.trajectory;
  if (tr.states.size() != tr.controls.size() + 1)
    throw std::invalid_argument("wire: trajectory state/control size mismatch");
  put_u32(out, t.uav);
  put_f64(out, tr.t0);
  put_f64(out, tr.dt);
  put_u32(out, static_cast<std::uint32_t>(tr.controls.size()));
  for (const auto& x : tr.states) {
    put_vec3(out, x.p);
    put_vec3(out, x.v);
    put_vec3(out, x.a);
    put_f64(out, x.psi);
  }
  for (const auto& u : tr.controls) {
    put_vec3(out, u.jerk);
    put_f64(out, u.psi_rate);
  }
}

TrajectoryShare decode_trajectory(Reader& rd) {
  TrajectoryShare t;
  t.uav = rd.u32();
  t.trajectory.t0 = rd.f64();
  t.trajectory.dt = rd.f64();
  std::uint32_t steps = rd.u32();
  check_count(steps, "trajectory steps");
  t.trajectory.states.resize(steps + 1);
  for (auto& x : t.trajectory.states) {
    x.p = rd.vec3();
    x.v = rd.vec3();
    x.a = rd.vec3();
    x.psi = rd.f64();
  }
  t.trajectory.controls.resize(steps);
  for (auto& u : t.trajectory.controls) {
    u.jerk = rd.vec3();
    u.psi_rate = rd.f64();
  }
  return t;
}

}  // namespace

std::vector<std::uint8_t> encode_message(const BusMessage& msg) {
  std::vector<std::uint8_t> out;
  put_u32(out, msg.sender);
  put_u64(out, msg.cycle);
  if (std::holds_alternative<StateReport>(msg.payload)) {
    out.push_back(kTagState);
    encode_state(out, std::get<StateReport>(msg.payload));
  } else if (std::holds_alternative<GuidanceBroadcast>(msg.payload)) {
    out.push_back(kTagGuidance);
    encode_guidance(out, std::get<GuidanceBroadcast>(msg.payload));
  } else {
    out.push_back(kTagTrajectory);
    encode_trajectory(out, std::get<TrajectoryShare>(msg.payload));
  }
  return out;
}

BusMessage decode_message(const std::uint8_t* data, std::size_t size) {
  Reader rd{data, size};
  BusMessage msg;
  msg.sender = rd.u32();
  msg.cycle = rd.u64();
  std::uint8_t tag = rd.u8();
  switch (tag) {
    case kTagState:
      msg.payload = decode_state(rd);
      break;
    case kTagGuidance:
      msg.payload = decode_guidance(rd);
      break;
    case kTagTrajectory:
      msg.payload = decode_trajectory(rd);
      break;
    default:
      throw std::runtime_error("wire: unknown payload tag");
  }
  if (rd.pos != rd.size) throw std::runtime_error("wire: trailing bytes");
  return msg;
}

}  // namespace formflight
