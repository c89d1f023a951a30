#include "mpa/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpa/rng.hpp"

namespace mpa {

bool TrajectoryAction::finite() const {
  for (const Vec2& w : waypoints) {
    if (!std::isfinite(w.x) || !std::isfinite(w.y)) return false;
  }
  return std::isfinite(dt_waypoint) && dt_waypoint > 0.0;
}

TrajectoryAction apply_residual(const TrajectoryAction& base, const ResidualAction& residual) {
  if (residual.deltas.size() != base.waypoints.size())
    throw std::invalid_argument("residual length does not match trajectory");
  TrajectoryAction out = base;
  for (std::size_t i = 0; i < out.waypoints.size(); ++i)
    out.waypoints[i] = out.waypoints[i] + residual.deltas[i];
  return out;
}

ResidualAction residual_between(const TrajectoryAction& applied, const TrajectoryAction& base) {
  if (applied.waypoints.size() != base.waypoints.size())
    throw std::invalid_argument("trajectory lengths differ");
  ResidualAction r;
  r.deltas.resize(base.waypoints.size());
  for (std::size_t i = 0; i < base.waypoints.size(); ++i)
    r.deltas[i] = applied.waypoints[i] - base.waypoints[i];
  return r;
}

TrajectoryAction transform_trajectory(const TrajectoryAction& traj,
                                      const AugmentationParams& params,
                                      const AugmentationRanges& ranges) {
  if (params.rotation_deg < ranges.rotation_min_deg || params.rotation_deg > ranges.rotation_max_deg)
    throw std::out_of_range("rotation outside configured range");
  if (params.warp < ranges.warp_min || params.warp > ranges.warp_max)
    throw std::out_of_range("warp outside configured range");
  if (params.noise_std < 0.0) throw std::out_of_range("noise_std must be >= 0");

  const double angle = params.rotation_deg * M_PI / 180.0;
  Rng rng(params.rng_seed);
  TrajectoryAction out = traj;
  for (Vec2& w : out.waypoints) {
    w = rotate(w, angle) * params.warp;
    if (params.noise_std > 0.0) {
      w.x += rng.normal(0.0, params.noise_std);
      w.y += rng.normal(0.0, params.noise_std);
    }
  }
  return out;
}

namespace {

int bin_index(double value, double lo, double hi, int bins) {
  if (bins <= 1 || hi <= lo) return 0;
  const int raw = static_cast<int>(std::floor((value - lo) / (hi - lo) * bins));
  return std::clamp(raw, 0, bins - 1);
}

}  // namespace

int mode_of(const AugmentationParams& params, const ModeGrid& grid,
            const AugmentationRanges& ranges) {
  if (params.rotation_deg < ranges.rotation_min_deg || params.rotation_deg > ranges.rotation_max_deg)
    throw std::out_of_range("rotation outside configured range");
  if (params.warp < ranges.warp_min || params.warp > ranges.warp_max)
    throw std::out_of_range("warp outside configured range");
  const int rb = bin_index(params.rotation_deg, ranges.rotation_min_deg, ranges.rotation_max_deg,
                           grid.rotation_bins);
  const int wb = bin_index(params.warp, ranges.warp_min, ranges.warp_max, grid.warp_bins);
  return rb * grid.warp_bins + wb;
}

double trajectory_l2(const TrajectoryAction& a, const TrajectoryAction& b, int horizon_steps) {
  if (horizon_steps < 1 || static_cast<std::size_t>(horizon_steps) > a.waypoints.size() ||
      static_cast<std::size_t>(horizon_steps) > b.waypoints.size())
    throw std::out_of_range("horizon exceeds trajectory length");
  double acc = 0.0;
  for (int i = 0; i < horizon_steps; ++i) acc += (a.waypoints[i] - b.waypoints[i]).norm();
  return acc / horizon_steps;
}

std::vector<TrackPoint> resample_to_control_rate(const TrajectoryAction& traj, double dt_sim) {
  if (dt_sim <= 0.0) throw std::invalid_argument("dt_sim must be > 0");
  if (traj.waypoints.empty()) throw std::invalid_argument("empty trajectory");

  const double total = static_cast<double>(traj.waypoints.size()) * traj.dt_waypoint;
  const int n = static_cast<int>(std::floor(total / dt_sim + 1e-9));

  // Knots: origin at t = 0, waypoint i at (i + 1) * dt_waypoint.
  auto knot = [&](int i) -> Vec2 { return i == 0 ? Vec2{0, 0} : traj.waypoints[i - 1]; };

  std::vector<TrackPoint> out;
  out.reserve(n);
  Vec2 prev{0, 0};
  double prev_heading = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double t = i * dt_sim;
    const double u = t / traj.dt_waypoint;
    const int seg = std::min(static_cast<int>(std::floor(u + 1e-12)),
                             static_cast<int>(traj.waypoints.size()) - 1);
    const double frac = std::clamp(u - seg, 0.0, 1.0);
    const Vec2 p = knot(seg) + (knot(seg + 1) - knot(seg)) * frac;

    const Vec2 chord = p - prev;
    const double chord_len = chord.norm();
    const double heading = chord_len > 1e-12 ? std::atan2(chord.y, chord.x) : prev_heading;
    out.push_back({Pose2D{p.x, p.y, heading}, chord_len / dt_sim, t});
    prev = p;
    prev_heading = heading;
  }
  return out;
}

}  // namespace mpa
