#include "mpa/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mpa {

WorldState make_initial_state(const Scene& scene, const SimParams& params) {
  (void)params;
  WorldState s;
  s.t = 0;
  s.ego.pose = scene.ego_start;
  s.ego.v = scene.ego_start_speed;
  s.agents_now = agent_poses_at(scene, 0);
  s.route_progress = scene.route.project(scene.ego_start.position()).s;
  s.scene = &scene;
  return s;
}

WorldState step_dynamics(const WorldState& state, Control control, const SimParams& params,
                         bool* clamped) {
  bool was_clamped = false;
  double accel = control.accel;
  double steer = control.steer;
  if (accel < params.accel_min || accel > params.accel_max) {
    accel = std::clamp(accel, params.accel_min, params.accel_max);
    was_clamped = true;
  }
  if (steer < -params.steer_max || steer > params.steer_max) {
    steer = std::clamp(steer, -params.steer_max, params.steer_max);
    was_clamped = true;
  }
  if (clamped != nullptr) *clamped = was_clamped;

  WorldState next = state;
  const double h = params.dt / params.substeps;
  double x = state.ego.pose.x;
  double y = state.ego.pose.y;
  double yaw = state.ego.pose.yaw;
  double v = state.ego.v;
  for (int i = 0; i < params.substeps; ++i) {
    x += v * std::cos(yaw) * h;
    y += v * std::sin(yaw) * h;
    yaw += v * std::tan(steer) / params.wheelbase * h;
    v = std::max(0.0, v + accel * h);
  }
  next.ego.pose = {x, y, normalize_angle(yaw)};
  next.ego.a = (v - state.ego.v) / params.dt;
  next.ego.v = v;
  next.ego.steering = steer;
  next.t = state.t + 1;
  next.agents_now = agent_poses_at(*state.scene, next.t);
  next.route_progress = state.scene->route.project({x, y}).s;
  return next;
}

std::vector<AgentPoseNow> agent_poses_at(const Scene& scene, int t) {
  std::vector<AgentPoseNow> out;
  out.reserve(scene.agents.size());
  for (std::size_t i = 0; i < scene.agents.size(); ++i) {
    const AgentTrack& a = scene.agents[i];
    const auto idx = static_cast<std::size_t>(std::floor(t * a.replay_ratio));
    const std::size_t clamped = std::min(idx, a.poses.size() - 1);
    out.push_back({static_cast<int>(i), a.poses[clamped]});
  }
  return out;
}

OrientedRect ego_rect(const WorldState& state, const SimParams& params) {
  return {state.ego.pose, params.ego_length, params.ego_width};
}

OrientedRect agent_rect(const AgentTrack& track, const Pose2D& pose) {
  return {pose, track.length, track.width};
}

double min_agent_clearance(const WorldState& state, const SimParams& params) {
  const OrientedRect ego = ego_rect(state, params);
  double best = std::numeric_limits<double>::infinity();
  for (const AgentPoseNow& a : state.agents_now) {
    const AgentTrack& track = state.scene->agents[a.agent_index];
    best = std::min(best, rect_clearance(ego, agent_rect(track, a.pose)));
  }
  return best;
}

Observation render_observation(const WorldState& state, const SimParams& params) {
  Observation obs;
  const int g = params.grid_size;
  obs.grid_size = g;
  obs.cell_size = params.cell_size;
  obs.bev.assign(static_cast<std::size_t>(g) * g, static_cast<std::uint8_t>(CellState::free));

  const Pose2D& ego = state.ego.pose;
  const double half = 0.5 * g * params.cell_size;

  // Off-drivable: cell centre outside the ring.
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const Vec2 local{(r + 0.5) * params.cell_size - half, (c + 0.5) * params.cell_size - half};
      const Vec2 world = ego_to_world(ego, local);
      if (!point_in_polygon(world, state.scene->drivable))
        obs.bev[static_cast<std::size_t>(r) * g + c] =
            static_cast<std::uint8_t>(CellState::off_drivable);
    }
  }

  // Agent occupancy: exact cell/rectangle intersection, restricted to
  // the agent's ego-frame bounding box.
  for (const AgentPoseNow& a : state.agents_now) {
    const AgentTrack& track = state.scene->agents[a.agent_index];
    const Vec2 rel = world_to_ego(ego, a.pose.position());
    const Pose2D rel_pose{rel.x, rel.y, normalize_angle(a.pose.yaw - ego.yaw)};
    const OrientedRect rect{rel_pose, track.length, track.width};
    const double radius = 0.5 * std::hypot(track.length, track.width);
    const int r_lo = std::max(0, static_cast<int>(std::floor((rel.x - radius + half) / params.cell_size)));
    const int r_hi = std::min(g - 1, static_cast<int>(std::ceil((rel.x + radius + half) / params.cell_size)));
    const int c_lo = std::max(0, static_cast<int>(std::floor((rel.y - radius + half) / params.cell_size)));
    const int c_hi = std::min(g - 1, static_cast<int>(std::ceil((rel.y + radius + half) / params.cell_size)));
    for (int r = r_lo; r <= r_hi; ++r) {
      for (int c = c_lo; c <= c_hi; ++c) {
        const Vec2 centre{(r + 0.5) * params.cell_size - half, (c + 0.5) * params.cell_size - half};
        const OrientedRect cell{{centre.x, centre.y, 0.0}, params.cell_size, params.cell_size};
        if (rects_overlap(cell, rect))
          obs.bev[static_cast<std::size_t>(r) * g + c] =
              static_cast<std::uint8_t>(CellState::occupied_agent);
      }
    }
  }

  obs.ego_v = state.ego.v;
  obs.ego_a = state.ego.a;
  obs.ego_yaw_rate = state.ego.v * std::tan(state.ego.steering) / params.wheelbase;

  // Next route points ahead of the current progress, padded with the
  // final point so the feature length is constant.
  const auto& arclen = state.scene->route.arclength();
  const auto& pts = state.scene->route.points();
  std::size_t i = 0;
  while (i < arclen.size() && arclen[i] <= state.route_progress + 1e-9) ++i;
  obs.route_feat.reserve(params.route_feat_points);
  for (int k = 0; k < params.route_feat_points; ++k) {
    const std::size_t idx = std::min(i + k, pts.size() - 1);
    obs.route_feat.push_back(world_to_ego(ego, pts[idx]));
  }
  return obs;
}

double drivable_inside_ratio(const WorldState& state, const SimParams& params) {
  constexpr int kLong = 20;
  constexpr int kLat = 8;
  const Pose2D& ego = state.ego.pose;
  int inside = 0;
  for (int i = 0; i < kLong; ++i) {
    for (int j = 0; j < kLat; ++j) {
      const Vec2 local{((i + 0.5) / kLong - 0.5) * params.ego_length,
                       ((j + 0.5) / kLat - 0.5) * params.ego_width};
      if (point_in_polygon(ego_to_world(ego, local), state.scene->drivable)) ++inside;
    }
  }
  return static_cast<double>(inside) / (kLong * kLat);
}

const char* to_string(TerminationKind kind) {
  switch (kind) {
    case TerminationKind::running: return "running";
    case TerminationKind::route_complete: return "route_complete";
    case TerminationKind::off_road: return "off_road";
    case TerminationKind::collision: return "collision";
    case TerminationKind::too_far: return "too_far";
    case TerminationKind::timeout: return "timeout";
  }
  return "?";
}

TerminationKind check_termination(const WorldState& state, const SimParams& params) {
  const OrientedRect ego = ego_rect(state, params);
  for (const AgentPoseNow& a : state.agents_now) {
    const AgentTrack& track = state.scene->agents[a.agent_index];
    if (rects_overlap(ego, agent_rect(track, a.pose))) return TerminationKind::collision;
  }
  if (drivable_inside_ratio(state, params) < params.offroad_ratio) return TerminationKind::off_road;
  if (state.scene->route.project(state.ego.pose.position()).dist > params.d_far)
    return TerminationKind::too_far;
  if (state.route_progress >= state.scene->route.length() - params.route_complete_slack)
    return TerminationKind::route_complete;
  if (state.t >= params.max_steps) return TerminationKind::timeout;
  return TerminationKind::running;
}

int route_command(const Scene& scene, double progress) {
  const double h0 = scene.route.heading_at(progress);
  const double h1 = scene.route.heading_at(std::min(progress + 10.0, scene.route.length()));
  const double d = normalize_angle(h1 - h0);
  if (d > 0.15) return 1;
  if (d < -0.15) return 2;
  return 0;
}

EgoHistoryFrame make_history_frame(const WorldState& state) {
  EgoHistoryFrame f;
  f.x = state.ego.pose.x;
  f.y = state.ego.pose.y;
  f.yaw = state.ego.pose.yaw;
  f.v = state.ego.v;
  f.a = state.ego.a;
  f.long_progress = state.route_progress;
  f.lat_dist = state.scene->route.project(state.ego.pose.position()).dist;
  f.command = route_command(*state.scene, state.route_progress);
  return f;
}

HistoryTracker::HistoryTracker(int t_hist, const WorldState& initial) : t_hist_(t_hist) {
  const EgoHistoryFrame f = make_history_frame(initial);
  history_.frames.assign(static_cast<std::size_t>(t_hist_), f);
}

void HistoryTracker::push(const WorldState& state) {
  history_.frames.erase(history_.frames.begin());
  history_.frames.push_back(make_history_frame(state));
}

}  // namespace mpa
