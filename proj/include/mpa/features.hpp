#pragma once

#include <Eigen/Dense>

#include "mpa/trajectory.hpp"
#include "mpa/world.hpp"

namespace mpa {

// Feature layout shared by the learned components. Raster cells map to
// {free: 0, occupied_agent: +1, off_drivable: -1}; history frames are
// re-expressed relative to the newest frame so inputs are pose
// invariant.

int observation_feature_dim(const SimParams& params);
Eigen::VectorXd observation_features(const Observation& obs);

int history_feature_dim(int t_hist);
Eigen::VectorXd history_features(const EgoHistory& hist);

// [observation features, history features]
Eigen::VectorXd policy_input(const Observation& obs, const EgoHistory& hist);

Eigen::VectorXd flatten_waypoints(const TrajectoryAction& traj);
TrajectoryAction unflatten_waypoints(const Eigen::VectorXd& v, double dt_waypoint);
Eigen::VectorXd flatten_residual(const ResidualAction& r);
ResidualAction unflatten_residual(const Eigen::VectorXd& v);

}  // namespace mpa
