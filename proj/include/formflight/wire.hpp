#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "formflight/corridor.hpp"
#include "formflight/mppi.hpp"

namespace formflight {

// Everything the swarm exchanges goes over these messages as little-endian
// byte buffers. The simulator round-trips each message through the codec so
// agents never touch one another's in-memory state.

struct StateReport {
  std::uint32_t uav = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double d_obs = 0.0;
  Polytope polytope;
};

struct GuidanceBroadcast {
  std::vector<int> assignment;  // slot index per uav
  // waypoints[i][k]: desired position of uav i after step k+1
  std::vector<std::vector<Eigen::Vector3d>> waypoints;
};

struct TrajectoryShare {
  std::uint32_t uav = 0;
  Trajectory trajectory;
};

using BusPayload = std::variant<StateReport, GuidanceBroadcast, TrajectoryShare>;

struct BusMessage {
  std::uint32_t sender = 0;
  std::uint64_t cycle = 0;
  BusPayload payload;
};

std::vector<std::uint8_t> encode_message(const BusMessage& msg);
BusMessage decode_message(const std::uint8_t* data, std::size_t size);

inline BusMessage decode_message(const std::vector<std::uint8_t>& bytes) {
  return decode_message(bytes.data(), bytes.size());
}

}  // namespace formflight
