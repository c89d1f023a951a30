#pragma once

#include <cstdint>
#include <vector>

#include "mpa/scene.hpp"
#include "mpa/trajectory.hpp"

namespace mpa {

// Simulator geometry, limits and observation layout. dt = 0.25 s (4 Hz)
// with 4 integration sub-steps.
struct SimParams {
  double dt = 0.25;
  int substeps = 4;
  double wheelbase = 2.7;
  double ego_length = 4.1;
  double ego_width = 1.8;
  double steer_max = 0.55;        // rad
  double accel_min = -6.0;        // m/s^2
  double accel_max = 3.0;
  int grid_size = 32;             // BEV raster G x G
  double cell_size = 1.0;         // m per cell
  int route_feat_points = 10;
  double d_far = 4.0;             // too-far termination, m
  int max_steps = 200;
  double route_complete_slack = 0.5;
  double offroad_ratio = 0.3;     // drivable inside-ratio violation bound
  double nc_inflation = 0.3;      // near-collision footprint inflation, m
  int t_hist = 4;
  int t_fut = 6;
  double dt_waypoint = 0.5;
};

struct EgoState {
  Pose2D pose;
  double v = 0.0;         // m/s, never negative
  double a = 0.0;         // realized acceleration over the last step
  double steering = 0.0;  // last applied steer command
};

struct AgentPoseNow {
  int agent_index = -1;
  Pose2D pose;
};

struct WorldState {
  int t = 0;
  EgoState ego;
  std::vector<AgentPoseNow> agents_now;
  double route_progress = 0.0;  // arclength of closest route projection
  const Scene* scene = nullptr;
};

WorldState make_initial_state(const Scene& scene, const SimParams& params);

struct Control {
  double accel = 0.0;
  double steer = 0.0;
};

// Kinematic bicycle update with substeps; out-of-bound controls are
// clamped (flagged via *clamped, not an error). Agents advance to t+1.
WorldState step_dynamics(const WorldState& state, Control control, const SimParams& params,
                         bool* clamped = nullptr);

std::vector<AgentPoseNow> agent_poses_at(const Scene& scene, int t);

enum class CellState : std::uint8_t { free = 0, occupied_agent = 1, off_drivable = 2 };

struct Observation {
  int grid_size = 0;
  double cell_size = 0.0;
  std::vector<std::uint8_t> bev;  // row-major; cell (r,c) at index r*G+c
  double ego_v = 0.0;
  double ego_a = 0.0;
  double ego_yaw_rate = 0.0;
  std::vector<Vec2> route_feat;  // next route points, ego frame

  bool operator==(const Observation&) const = default;
};

// Deterministic ego-centred, ego-aligned raster. A cell is
// occupied_agent iff it intersects any agent rectangle (exact SAT
// test); off_drivable iff its centre lies outside the drivable ring.
// Agent occupancy wins when both apply.
Observation render_observation(const WorldState& state, const SimParams& params);

enum class TerminationKind { running, route_complete, off_road, collision, too_far, timeout };

const char* to_string(TerminationKind kind);

// Checked in the order collision, off_road, too_far, route_complete,
// timeout.
TerminationKind check_termination(const WorldState& state, const SimParams& params);

// Fraction of ego-footprint sample points inside the drivable ring
// (20 x 8 interior grid).
double drivable_inside_ratio(const WorldState& state, const SimParams& params);

OrientedRect ego_rect(const WorldState& state, const SimParams& params);
OrientedRect agent_rect(const AgentTrack& track, const Pose2D& pose);

// Minimum clearance between the ego rectangle and any agent rectangle;
// +inf when the scene has no agents.
double min_agent_clearance(const WorldState& state, const SimParams& params);

// Discrete maneuver command from route heading change over the next
// 10 m: 0 straight, 1 left, 2 right.
int route_command(const Scene& scene, double progress);

// Builds per-step EgoHistory frames and keeps the last t_hist of them.
class HistoryTracker {
 public:
  HistoryTracker(int t_hist, const WorldState& initial);
  void push(const WorldState& state);
  const EgoHistory& history() const { return history_; }

 private:
  int t_hist_;
  EgoHistory history_;
};

EgoHistoryFrame make_history_frame(const WorldState& state);

}  // namespace mpa
