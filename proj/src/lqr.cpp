#include "mpa/lqr.hpp"

#include <algorithm>
#include <cmath>

namespace mpa {

DareResult solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, int max_iters,
                      double tol) {
  DareResult res;
  Eigen::MatrixXd P = Q;
  for (int i = 0; i < max_iters; ++i) {
    const Eigen::MatrixXd BtP = B.transpose() * P;
    const Eigen::MatrixXd gain_inv = (R + BtP * B).inverse();
    const Eigen::MatrixXd P_next =
        Q + A.transpose() * P * A - A.transpose() * P * B * gain_inv * BtP * A;
    const double delta = (P_next - P).cwiseAbs().maxCoeff();
    P = P_next;
    res.iterations = i + 1;
    if (delta < tol) {
      res.converged = true;
      break;
    }
  }
  res.P = P;
  res.K = (R + B.transpose() * P * B).inverse() * B.transpose() * P * A;
  return res;
}

TrackCommand track_trajectory(const TrajectoryAction& traj, double ego_speed, double dt,
                              const SimParams& sim, const LqrConfig& cfg) {
  TrackCommand cmd;

  double extent = 0.0;
  for (const Vec2& w : traj.waypoints) extent = std::max(extent, w.norm());
  if (traj.waypoints.empty() || extent < 1e-6) {
    cmd.accel = sim.accel_min;
    cmd.steer = 0.0;
    cmd.degenerate = true;
    return cmd;
  }

  const std::vector<TrackPoint> samples = resample_to_control_rate(traj, dt);
  const TrackPoint& target = samples.front();

  // Tracking error in the target-path frame; the ego sits at the
  // origin of the trajectory frame by construction.
  const Vec2 d = Vec2{0.0, 0.0} - target.pose.position();
  const Vec2 d_path = rotate(d, -target.pose.yaw);
  const double e_lat = d_path.y;
  const double e_yaw = normalize_angle(0.0 - target.pose.yaw);
  const double e_v = ego_speed - target.speed;

  const double v_lin = std::max(ego_speed, cfg.v_lin_floor);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 3);
  A(0, 1) = v_lin * dt;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 2);
  B(1, 0) = v_lin * dt / sim.wheelbase;
  B(2, 1) = dt;
  Eigen::Matrix3d Q = Eigen::Vector3d(cfg.q_lat, cfg.q_yaw, cfg.q_v).asDiagonal();
  Eigen::Matrix2d R = Eigen::Vector2d(cfg.r_steer, cfg.r_accel).asDiagonal();

  const DareResult dare = solve_dare(A, B, Q, R, cfg.riccati_iters, cfg.riccati_tol);
  const Eigen::Vector3d e(e_lat, e_yaw, e_v);
  const Eigen::Vector2d u = -dare.K * e;

  // Feedforward for the local curvature and planned speed slope, taken
  // from plan-intrinsic waypoint intervals. The first interval is
  // anchored at the ego and would leak tracking error into the
  // feedforward, so it is skipped.
  double steer_ff = 0.0;
  double accel_ff = 0.0;
  if (traj.waypoints.size() >= 3) {
    const Vec2 seg1 = traj.waypoints[1] - traj.waypoints[0];
    const Vec2 seg2 = traj.waypoints[2] - traj.waypoints[1];
    const double len1 = seg1.norm();
    const double len2 = seg2.norm();
    if (len1 > 1e-6 && len2 > 1e-6) {
      const double h1 = std::atan2(seg1.y, seg1.x);
      const double h2 = std::atan2(seg2.y, seg2.x);
      const double kappa = normalize_angle(h2 - h1) / (0.5 * (len1 + len2));
      steer_ff = std::atan(sim.wheelbase * kappa);
      accel_ff = (len2 - len1) / (traj.dt_waypoint * traj.dt_waypoint);
    }
  }

  cmd.steer = steer_ff + u(0);
  cmd.accel = accel_ff + u(1);
  if (cmd.steer < -sim.steer_max || cmd.steer > sim.steer_max ||
      cmd.accel < sim.accel_min || cmd.accel > sim.accel_max)
    cmd.saturated = true;
  cmd.steer = std::clamp(cmd.steer, -sim.steer_max, sim.steer_max);
  cmd.accel = std::clamp(cmd.accel, sim.accel_min, sim.accel_max);
  return cmd;
}

}  // namespace mpa
