#include "mpa/features.hpp"

namespace mpa {

int observation_feature_dim(const SimParams& params) {
  return params.grid_size * params.grid_size + 3 + 2 * params.route_feat_points;
}

Eigen::VectorXd observation_features(const Observation& obs) {
  const int cells = obs.grid_size * obs.grid_size;
  Eigen::VectorXd f(cells + 3 + 2 * static_cast<int>(obs.route_feat.size()));
  for (int i = 0; i < cells; ++i) {
    switch (static_cast<CellState>(obs.bev[i])) {
      case CellState::free: f(i) = 0.0; break;
      case CellState::occupied_agent: f(i) = 1.0; break;
      case CellState::off_drivable: f(i) = -1.0; break;
    }
  }
  // Kinematic and route features scaled to roughly unit range.
  int at = cells;
  f(at++) = 0.1 * obs.ego_v;
  f(at++) = 0.25 * obs.ego_a;
  f(at++) = obs.ego_yaw_rate;
  for (const Vec2& p : obs.route_feat) {
    f(at++) = 0.1 * p.x;
    f(at++) = 0.1 * p.y;
  }
  return f;
}

int history_feature_dim(int t_hist) { return t_hist * 8; }

Eigen::VectorXd history_features(const EgoHistory& hist) {
  const EgoHistoryFrame& ref = hist.frames.back();
  const Pose2D ref_pose{ref.x, ref.y, ref.yaw};
  Eigen::VectorXd f(8 * static_cast<int>(hist.frames.size()));
  int at = 0;
  for (const EgoHistoryFrame& fr : hist.frames) {
    const Vec2 rel = world_to_ego(ref_pose, {fr.x, fr.y});
    f(at++) = 0.1 * rel.x;
    f(at++) = 0.1 * rel.y;
    f(at++) = normalize_angle(fr.yaw - ref.yaw);
    f(at++) = 0.1 * fr.v;
    f(at++) = 0.25 * fr.a;
    f(at++) = 0.1 * (fr.long_progress - ref.long_progress);
    f(at++) = 0.5 * fr.lat_dist;
    f(at++) = 0.5 * static_cast<double>(fr.command);
  }
  return f;
}

Eigen::VectorXd policy_input(const Observation& obs, const EgoHistory& hist) {
  const Eigen::VectorXd of = observation_features(obs);
  const Eigen::VectorXd hf = history_features(hist);
  Eigen::VectorXd f(of.size() + hf.size());
  f << of, hf;
  return f;
}

Eigen::VectorXd flatten_waypoints(const TrajectoryAction& traj) {
  Eigen::VectorXd v(2 * static_cast<int>(traj.waypoints.size()));
  for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
    v(2 * i) = traj.waypoints[i].x;
    v(2 * i + 1) = traj.waypoints[i].y;
  }
  return v;
}

TrajectoryAction unflatten_waypoints(const Eigen::VectorXd& v, double dt_waypoint) {
  TrajectoryAction traj;
  traj.dt_waypoint = dt_waypoint;
  traj.waypoints.resize(static_cast<std::size_t>(v.size() / 2));
  for (std::size_t i = 0; i < traj.waypoints.size(); ++i)
    traj.waypoints[i] = {v(2 * i), v(2 * i + 1)};
  return traj;
}

Eigen::VectorXd flatten_residual(const ResidualAction& r) {
  Eigen::VectorXd v(2 * static_cast<int>(r.deltas.size()));
  for (std::size_t i = 0; i < r.deltas.size(); ++i) {
    v(2 * i) = r.deltas[i].x;
    v(2 * i + 1) = r.deltas[i].y;
  }
  return v;
}

ResidualAction unflatten_residual(const Eigen::VectorXd& v) {
  ResidualAction r;
  r.deltas.resize(static_cast<std::size_t>(v.size() / 2));
  for (std::size_t i = 0; i < r.deltas.size(); ++i) r.deltas[i] = {v(2 * i), v(2 * i + 1)};
  return r;
}

}  // namespace mpa
