#include "mpa/rewards.hpp"

#include <algorithm>
#include <stdexcept>

namespace mpa {

RewardVector step_reward(const WorldState& prev, const WorldState& curr, const RewardConfig& cfg,
                         const SimParams& sim) {
  RewardVector r;
  r.r_route = curr.route_progress - prev.route_progress;
  r.r_dist = -curr.scene->route.project(curr.ego.pose.position()).dist;

  const double clearance = min_agent_clearance(curr, sim);
  const bool off_drivable = drivable_inside_ratio(curr, sim) < sim.offroad_ratio;
  r.r_collision = (clearance < cfg.delta_collision || off_drivable) ? -1.0 : 0.0;

  r.r_speed = curr.ego.v > cfg.delta_velo ? -(curr.ego.v - cfg.delta_velo) : 0.0;
  return r;
}

double weighted_reward(const RewardVector& r, const QWeights& w) {
  return w.route * r.r_route + w.dist * r.r_dist + w.collision * r.r_collision +
         w.speed * r.r_speed;
}

double QLabels::get(int principle) const {
  switch (principle) {
    case 0: return q_route;
    case 1: return q_dist;
    case 2: return q_collision;
    case 3: return q_speed;
  }
  throw std::out_of_range("principle index");
}

QLabels discounted_q_label(std::span<const RewardVector> window, const RewardConfig& cfg) {
  if (window.empty()) throw std::invalid_argument("empty reward window");
  QLabels q;
  const int n = std::min<int>(cfg.label_horizon, static_cast<int>(window.size()));
  double discount = 1.0;
  for (int k = 0; k < n; ++k) {
    q.q_route += discount * window[k].r_route;
    q.q_dist += discount * window[k].r_dist;
    q.q_collision += discount * window[k].r_collision;
    q.q_speed += discount * window[k].r_speed;
    discount *= cfg.gamma;
  }
  return q;
}

double weighted_labels(const QLabels& q, const QWeights& w) {
  return w.route * q.q_route + w.dist * q.q_dist + w.collision * q.q_collision +
         w.speed * q.q_speed;
}

}  // namespace mpa
