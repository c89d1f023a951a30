#pragma once

#include <cstdint>
#include <vector>

#include "mpa/geometry.hpp"

namespace mpa {

// A planned trajectory: T_fut future waypoints in the ego frame.
// Waypoint i is the target position at time (i + 1) * dt_waypoint.
struct TrajectoryAction {
  std::vector<Vec2> waypoints;
  double dt_waypoint = 0.5;

  bool finite() const;
};

struct ResidualAction {
  std::vector<Vec2> deltas;
};

TrajectoryAction apply_residual(const TrajectoryAction& base, const ResidualAction& residual);
ResidualAction residual_between(const TrajectoryAction& applied, const TrajectoryAction& base);

struct EgoHistoryFrame {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double v = 0.0;
  double a = 0.0;
  double long_progress = 0.0;  // arclength along the route, m
  double lat_dist = 0.0;       // unsigned distance to the route, m
  int command = 0;             // 0 straight, 1 left, 2 right
};

// Rolling window of the last T_hist ego frames, oldest first.
struct EgoHistory {
  std::vector<EgoHistoryFrame> frames;
};

struct AugmentationRanges {
  double rotation_min_deg = -10.0;
  double rotation_max_deg = 10.0;
  double warp_min = 0.1;
  double warp_max = 1.0;
};

struct AugmentationParams {
  double rotation_deg = 0.0;
  double warp = 1.0;
  double noise_std = 0.0;  // meters, per coordinate
  std::uint64_t rng_seed = 0;
};

// Rotation/warp bin grid defining the adapter mode index.
struct ModeGrid {
  int rotation_bins = 2;
  int warp_bins = 3;

  int modes() const { return rotation_bins * warp_bins; }
};

// Maps each waypoint w to warp * R(rotation) * w + eps with
// eps ~ N(0, noise_std^2) per coordinate from a stream seeded by
// params.rng_seed. Throws std::out_of_range when params violate ranges.
TrajectoryAction transform_trajectory(const TrajectoryAction& traj,
                                      const AugmentationParams& params,
                                      const AugmentationRanges& ranges);

// Row-major mode index: rotation_bin * warp_bins + warp_bin, with
// equal-width bins over the configured ranges.
int mode_of(const AugmentationParams& params, const ModeGrid& grid,
            const AugmentationRanges& ranges);

// Mean Euclidean distance over the first horizon_steps waypoint pairs.
double trajectory_l2(const TrajectoryAction& a, const TrajectoryAction& b, int horizon_steps);

struct TrackPoint {
  Pose2D pose;
  double speed = 0.0;  // chord speed over the preceding dt_sim
  double t = 0.0;
};

// Linear interpolation of the plan at multiples of dt_sim, anchored at
// the ego origin at t = 0; first sample at t = dt_sim. Heading is the
// direction of the chord ending at the sample.
std::vector<TrackPoint> resample_to_control_rate(const TrajectoryAction& traj, double dt_sim);

}  // namespace mpa
