#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "formflight/assignment.hpp"
#include "formflight/corridor.hpp"
#include "formflight/formation_config.hpp"
#include "formflight/formation_front.hpp"
#include "formflight/mppi.hpp"
#include "formflight/world.hpp"

namespace formflight {

// Equilateral triangle with an agent on each vertex and each edge midpoint,
// listed in outline order starting from the +x vertex. Centroid is exactly
// the origin.
FormationShape triangle6_shape(double circumradius = 2.4);

// Least-squares shape deviation: fit center + uniform scale mapping the
// desired shape onto the given slot-ordered positions, then return the
// residual normalized by agent count and fitted scale. Zero means the swarm
// sits on a perfectly scaled/translated copy of the shape. Throws if the
// shape is degenerate (all points coincident).
double formation_similarity(const std::vector<Eigen::Vector3d>& positions_by_slot,
                            const FormationShape& shape);

struct SwarmConfig {
  int n_uavs = 6;
  FormationShape shape = triangle6_shape();
  double s_des = 1.0;
  double uav_radius = 0.15;
  double goal_tolerance = 0.5;
  double distortion_limit = 0.5;  // episode counts as distorted at or above this
  double replan_period = 0.1;     // must be an integer multiple of mppi.dt
  double episode_timeout = 120.0;
  std::uint64_t master_seed = 1;
  double assign_epsilon = 1e-6;

  SampleParams front;
  FrontWeights front_weights;
  MppiParams mppi;
  RunningCostParams cost;
  SfcParams sfc;
  double d_cap = 5.0;
};

struct TraceRow {
  double time = 0.0;
  int uav = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double similarity = 0.0;
  double d_obs = 0.0;
  double scale = 0.0;
};

enum class EpisodeOutcome { Reached, Timeout, PlannerStuck, AgentError };

const char* outcome_name(EpisodeOutcome o);

struct EpisodeReport {
  bool success = false;
  EpisodeOutcome outcome = EpisodeOutcome::Timeout;
  double completion_time = 0.0;
  double avg_similarity = 0.0;
  double max_similarity = 0.0;
  double min_obstacle_clearance = 0.0;
  double min_mutual_distance = 0.0;
  long obstacle_violations = 0;
  long mutual_violations = 0;
  double min_scale = 0.0;
  double final_center_error = 0.0;
  double max_speed = 0.0;
  double max_accel = 0.0;
  long cycles = 0;
  long hold_cycles = 0;
  std::string error;
};

std::string report_to_string(const EpisodeReport& report);
void write_report_file(const EpisodeReport& report, const std::string& path);
void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path);

// One swarm flying one scenario. All inter-agent data passes through the
// wire codec; the leader is uav 0. step_cycle runs one sense / plan /
// optimize / execute round of length replan_period.
class Simulator {
 public:
  Simulator(const ScenarioSpec& scenario, const SwarmConfig& config);

  bool done() const { return done_; }
  void step_cycle();
  EpisodeReport run();

  double time() const { return time_; }
  long cycle() const { return cycle_; }
  long hold_cycles() const { return hold_cycles_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  const UavState& state(int i) const { return agents_[i].state; }
  const std::vector<int>& assignment() const { return sigma_; }
  double current_scale() const { return scale_now_; }
  const OccupancyGrid& grid() const { return grid_; }
  const DistanceField& field() const { return field_; }
  Eigen::Vector3d swarm_center() const;
  double similarity_now() const;

 private:
  struct Agent {
    UavState state;
    std::unique_ptr<MppiController> controller;
    std::vector<Eigen::Vector3d> guidance;
    Trajectory shared;  // trajectory broadcast last cycle
    bool has_shared = false;
    double d_obs = 0.0;
  };

  void sense_phase(std::vector<std::vector<std::uint8_t>>& reports);
  bool lead_phase(const std::vector<std::vector<std::uint8_t>>& reports,
                  std::vector<std::uint8_t>& broadcast);
  void optimize_phase(const std::vector<std::uint8_t>& broadcast,
                      std::vector<std::vector<std::uint8_t>>& shares);
  void execute_phase();
  void record_similarity();
  void append_trace_rows();
  void finish(EpisodeOutcome outcome);

  ScenarioSpec scenario_;
  SwarmConfig cfg_;
  OccupancyGrid grid_;
  DistanceField field_;
  Eigen::Vector3d goal_center_;
  int exec_steps_ = 1;

  std::vector<Agent> agents_;
  std::vector<int> sigma_;
  double scale_now_ = 1.0;
  std::optional<Eigen::Vector3d> prev_direction_;
  long consecutive_holds_ = 0;
  long cruise_streak_ = 0;
  long floor_since_ = -1;
  bool prison_active_ = false;
  bool had_squeeze_done_ = true;
  // Trailing centroid-to-goal distances; the difference across the window
  // is the executed progress that escalation decisions key on.
  std::deque<double> goal_dist_hist_;
  // Recently jammed centers with the cycle they were (re)confirmed at;
  // replans are repelled from these until they expire.
  std::vector<std::pair<long, Eigen::Vector3d>> tabu_markers_;

  double time_ = 0.0;
  long cycle_ = 0;
  bool done_ = false;
  EpisodeOutcome outcome_ = EpisodeOutcome::Timeout;
  std::string error_;

  std::vector<std::pair<double, double>> f_samples_;
  double min_clearance_ = 0.0;
  double min_mutual_ = 0.0;
  double max_speed_ = 0.0;
  double max_accel_ = 0.0;
  double min_scale_ = 0.0;
  long obstacle_violations_ = 0;
  long mutual_violations_ = 0;
  long hold_cycles_ = 0;
  std::vector<TraceRow> trace_;
};

EpisodeReport run_episode(const ScenarioSpec& scenario, const SwarmConfig& config,
                          std::vector<TraceRow>* trace = nullptr);

}  // namespace formflight
