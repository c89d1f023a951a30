#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpa/geometry.hpp"

namespace mpa {

// A surrounding agent replayed from a recorded track. The pose at sim
// step t is poses[floor(t * replay_ratio)], held at the end.
struct AgentTrack {
  std::string agent_id;
  double length = 4.2;
  double width = 1.8;
  std::vector<Pose2D> poses;  // sampled at the simulation rate
  double replay_ratio = 1.0;
  bool adversarial = false;
};

struct Scene {
  std::string scene_id;
  Polyline route;              // centerline, meters
  std::vector<Vec2> drivable;  // simple polygon ring, meters
  std::vector<AgentTrack> agents;
  Pose2D ego_start;
  double ego_start_speed = 0.0;
  bool adversarial = false;

  // Throws std::invalid_argument on any structural invariant violation.
  void validate() const;
};

enum class SceneKind { straight, curve, intersection, cut_in };

const char* to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string& s);

// Deterministic procedural scene: same (kind, seed) gives an identical
// scene. Routes are 40-120 m; cut_in scenes carry one adversarial agent
// that merges into the ego lane 1.5-3 s ahead of the ego.
Scene make_scene(SceneKind kind, std::uint64_t seed);

}  // namespace mpa
