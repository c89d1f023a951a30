#pragma once

#include <Eigen/Dense>

#include "mpa/trajectory.hpp"
#include "mpa/world.hpp"

namespace mpa {

struct LqrConfig {
  double q_lat = 1.0;
  double q_yaw = 2.0;
  double q_v = 0.5;
  double r_steer = 4.0;
  double r_accel = 1.0;
  int riccati_iters = 200;
  double riccati_tol = 1e-9;
  double v_lin_floor = 1.0;  // linearization speed floor, m/s
};

struct DareResult {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;
  bool converged = false;
  int iterations = 0;
};

// Fixed-point iteration of the discrete algebraic Riccati equation
// starting from P = Q; K = (R + B'PB)^-1 B'PA. Non-convergence within
// the iteration budget is reported, not thrown.
DareResult solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R, int max_iters,
                      double tol);

struct TrackCommand {
  double accel = 0.0;
  double steer = 0.0;
  bool saturated = false;
  bool degenerate = false;  // trajectory unusable; full brake issued
};

// One step of error-state LQR tracking of an ego-frame trajectory:
// error (e_lat, e_yaw, e_v) against the resampled point at t + dt,
// bicycle model re-linearized about max(v, v_lin_floor).
TrackCommand track_trajectory(const TrajectoryAction& traj, double ego_speed, double dt,
                              const SimParams& sim, const LqrConfig& cfg);

}  // namespace mpa
