#pragma once

#include <span>

#include "mpa/world.hpp"

namespace mpa {

struct RewardVector {
  double r_route = 0.0;      // route arclength progress, m (signed)
  double r_dist = 0.0;       // -distance to closest route point, <= 0
  double r_collision = 0.0;  // -1 or 0
  double r_speed = 0.0;      // -(v - delta_velo) when overspeeding, <= 0
};

struct RewardConfig {
  double delta_collision = 0.3;  // clearance band, m
  double delta_velo = 12.0;      // speed limit, m/s
  double gamma = 0.9;
  int label_horizon = 5;  // T, steps
};

// Per-principle weights for the combined value; also used to collapse a
// RewardVector to the scalar reward used by beam pruning/filtering.
struct QWeights {
  double route = 1.0;
  double dist = 0.2;
  double collision = 5.0;
  double speed = 0.1;
};

RewardVector step_reward(const WorldState& prev, const WorldState& curr, const RewardConfig& cfg,
                         const SimParams& sim);

double weighted_reward(const RewardVector& r, const QWeights& w);

struct QLabels {
  double q_route = 0.0;
  double q_dist = 0.0;
  double q_collision = 0.0;
  double q_speed = 0.0;

  double get(int principle) const;
};

// Discounted truncated sum over min(T, window length) steps; throws on
// an empty window.
QLabels discounted_q_label(std::span<const RewardVector> window, const RewardConfig& cfg);

double weighted_labels(const QLabels& q, const QWeights& w);

}  // namespace mpa
