#include "mpa/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mpa/rng.hpp"

namespace mpa {

void Scene::validate() const {
  if (scene_id.empty()) throw std::invalid_argument("scene_id empty");
  if (route.size() < 2) throw std::invalid_argument("route needs >= 2 points");
  if (drivable.size() < 3) throw std::invalid_argument("drivable ring needs >= 3 points");
  if (!point_in_polygon(ego_start.position(), drivable))
    throw std::invalid_argument("ego_start outside drivable");
  if (ego_start_speed < 0.0) throw std::invalid_argument("ego_start_speed < 0");
  for (const AgentTrack& a : agents) {
    if (a.poses.empty()) throw std::invalid_argument("agent track empty: " + a.agent_id);
    if (a.length <= 0.0 || a.width <= 0.0)
      throw std::invalid_argument("agent footprint must be positive: " + a.agent_id);
    if (a.replay_ratio < 0.0) throw std::invalid_argument("replay_ratio < 0: " + a.agent_id);
  }
}

const char* to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::straight: return "straight";
    case SceneKind::curve: return "curve";
    case SceneKind::intersection: return "intersection";
    case SceneKind::cut_in: return "cut_in";
  }
  return "?";
}

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "straight") return SceneKind::straight;
  if (s == "curve") return SceneKind::curve;
  if (s == "intersection") return SceneKind::intersection;
  if (s == "cut_in") return SceneKind::cut_in;
  throw std::invalid_argument("unknown scene kind: " + s);
}

namespace {

constexpr double kSimDt = 0.25;
constexpr int kTrackSteps = 260;  // max episode + label margin

// Positions are snapped to a 1/1024 m grid so that translating a whole
// scene by grid-aligned offsets stays exact in double precision.
double quant(double v) { return std::round(v * 1024.0) / 1024.0; }

struct Frame {
  double rot = 0.0;
  Vec2 offset;

  Vec2 apply(const Vec2& p) const { return rotate(p, rot) + offset; }
  Pose2D apply(const Pose2D& p) const {
    const Vec2 q = apply(p.position());
    return {q.x, q.y, normalize_angle(p.yaw + rot)};
  }
};

Vec2 quant(const Vec2& p) { return {quant(p.x), quant(p.y)}; }
Pose2D quant(const Pose2D& p) { return {quant(p.x), quant(p.y), p.yaw}; }

// Local-frame route descriptor: centerline plus per-side corridor widths.
struct RoutePlan {
  std::vector<Vec2> center;
  double left = 3.5;
  double right = 3.5;
  double back_margin = 6.0;
  double fwd_margin = 6.0;
};

std::vector<Vec2> corridor_ring(const RoutePlan& plan) {
  const std::vector<Vec2>& c = plan.center;
  auto heading = [&](std::size_t i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = std::min(i + 1, c.size() - 1);
    const Vec2 d = c[b] - c[a];
    return std::atan2(d.y, d.x);
  };
  std::vector<Vec2> left, right;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double th = heading(i);
    const Vec2 n{-std::sin(th), std::cos(th)};
    Vec2 base = c[i];
    if (i == 0) base = base - rotate({plan.back_margin, 0}, th);
    if (i + 1 == c.size()) base = base + rotate({plan.fwd_margin, 0}, th);
    left.push_back(base + n * plan.left);
    right.push_back(base - n * plan.right);
  }
  std::vector<Vec2> ring = left;
  ring.insert(ring.end(), right.rbegin(), right.rend());
  return ring;
}

// Removes points closer than 0.25 m to their predecessor so the later
// 1/1024 m snap can never collapse consecutive route points.
std::vector<Vec2> sanitize(std::vector<Vec2> pts) {
  std::vector<Vec2> out;
  for (const Vec2& p : pts) {
    if (out.empty() || (p - out.back()).norm() >= 0.25) out.push_back(p);
  }
  return out;
}

std::vector<Vec2> straight_center(double length, double spacing = 2.0) {
  std::vector<Vec2> pts;
  const int n = static_cast<int>(std::ceil(length / spacing));
  for (int i = 0; i <= n; ++i) pts.push_back({std::min(length, i * spacing), 0.0});
  return sanitize(pts);
}

// Straight lead-in, constant-curvature arc, straight lead-out.
std::vector<Vec2> curve_center(double lead_in, double radius, double arc_angle, double lead_out,
                               double spacing = 2.0) {
  std::vector<Vec2> pts;
  for (double s = 0.0; s < lead_in; s += spacing) pts.push_back({s, 0.0});
  const double side = arc_angle >= 0 ? 1.0 : -1.0;
  const Vec2 center{lead_in, side * radius};
  const double total_arc = std::abs(arc_angle) * radius;
  const int n_arc = static_cast<int>(std::ceil(total_arc / spacing));
  for (int i = 0; i <= n_arc; ++i) {
    const double phi = std::abs(arc_angle) * i / n_arc;
    pts.push_back({center.x + radius * std::sin(phi), center.y - side * radius * std::cos(phi)});
  }
  const double exit_heading = arc_angle;
  const Vec2 exit = pts.back();
  const int n_out = static_cast<int>(std::ceil(lead_out / spacing));
  for (int i = 1; i <= n_out; ++i) {
    const double s = std::min(lead_out, i * spacing);
    pts.push_back(exit + rotate({s, 0.0}, exit_heading));
  }
  return sanitize(pts);
}

double path_length(const std::vector<Vec2>& pts) {
  double acc = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) acc += (pts[i] - pts[i - 1]).norm();
  return acc;
}

// Arclength-parameterized sampling helpers over a local centerline.
struct CenterRef {
  Polyline line;
  explicit CenterRef(const std::vector<Vec2>& pts) : line(pts) {}
  Pose2D at(double s, double lateral, double yaw_offset = 0.0) const {
    const double th = line.heading_at(s);
    const Vec2 n{-std::sin(th), std::cos(th)};
    const Vec2 p = line.point_at(s) + n * lateral;
    return {p.x, p.y, normalize_angle(th + yaw_offset)};
  }
};

AgentTrack track_along(const CenterRef& ref, const std::string& id, double s0, double speed,
                       double lateral, bool reverse, double s_min, double s_max) {
  AgentTrack tr;
  tr.agent_id = id;
  double s = s0;
  for (int t = 0; t < kTrackSteps; ++t) {
    const double sc = std::min(std::max(s, s_min), s_max);
    tr.poses.push_back(ref.at(sc, lateral, reverse ? M_PI : 0.0));
    s += (reverse ? -speed : speed) * kSimDt;
  }
  return tr;
}

}  // namespace

Scene make_scene(SceneKind kind, std::uint64_t seed) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kind) + 101));
  Scene scene;
  {
    std::ostringstream id;
    id << to_string(kind) << "-" << std::hex << seed;
    scene.scene_id = id.str();
  }

  RoutePlan plan;
  std::vector<AgentTrack> agents;
  const double cruise = 8.0;

  switch (kind) {
    case SceneKind::straight: {
      const double length = rng.uniform(45.0, 110.0);
      plan.center = straight_center(length);
      CenterRef ref(plan.center);
      const int n_agents = rng.uniform_int(3);
      for (int i = 0; i < n_agents; ++i) {
        const int style = rng.uniform_int(3);
        const std::string id = "agent-" + std::to_string(i);
        if (style == 0) {  // lead vehicle pulling away
          agents.push_back(track_along(ref, id, rng.uniform(25.0, 40.0),
                                       cruise * rng.uniform(1.05, 1.3), 0.0, false, 0.0, length));
        } else if (style == 1) {  // oncoming in the opposite lane
          agents.push_back(track_along(ref, id, rng.uniform(0.6, 0.95) * length,
                                       rng.uniform(4.0, 7.0), 2.4, true, 0.0, length));
        } else {  // parked at the lane edge
          AgentTrack tr;
          tr.agent_id = id;
          tr.poses.push_back(ref.at(rng.uniform(0.3, 0.7) * length,
                                    rng.uniform_int(2) == 0 ? 2.4 : -2.4));
          agents.push_back(tr);
        }
      }
      break;
    }
    case SceneKind::curve: {
      const double radius = rng.uniform(30.0, 70.0);
      const double angle = rng.uniform(0.5, 1.1) * (rng.uniform_int(2) == 0 ? 1.0 : -1.0);
      const double lead_in = rng.uniform(10.0, 18.0);
      double lead_out = rng.uniform(10.0, 20.0);
      // Keep total length inside [40, 120].
      double total = lead_in + radius * std::abs(angle) + lead_out;
      if (total > 118.0) lead_out = std::max(6.0, lead_out - (total - 118.0));
      plan.center = curve_center(lead_in, radius, angle, lead_out);
      CenterRef ref(plan.center);
      const double length = path_length(plan.center);
      if (rng.uniform_int(2) == 0) {
        agents.push_back(track_along(ref, "agent-0", rng.uniform(25.0, 35.0),
                                     cruise * rng.uniform(1.05, 1.25), 0.0, false, 0.0, length));
      }
      if (rng.uniform_int(2) == 0) {
        AgentTrack tr;
        tr.agent_id = "agent-p";
        tr.poses.push_back(ref.at(rng.uniform(0.4, 0.7) * length,
                                  rng.uniform_int(2) == 0 ? 2.4 : -2.4));
        agents.push_back(tr);
      }
      break;
    }
    case SceneKind::intersection: {
      // Cross-shaped drivable drawn explicitly; route goes straight
      // through or turns onto the crossing corridor.
      const double hw = 3.5;                       // main corridor half width
      const double hc = 4.0;                       // crossing corridor half width
      const double cx = rng.uniform(30.0, 45.0);   // crossing centre
      const double x1 = cx + rng.uniform(25.0, 45.0);
      const double yext = rng.uniform(26.0, 40.0);
      const double x0 = -6.0;
      const int turn = rng.uniform_int(3);  // 0 straight, 1 left, 2 right

      std::vector<Vec2> center;
      if (turn == 0) {
        center = straight_center(x1 - 6.0);
      } else {
        const double r = 8.0;
        const double side = turn == 1 ? 1.0 : -1.0;
        for (double s = 0.0; s < cx - r; s += 2.0) center.push_back({s, 0.0});
        const Vec2 arc_c{cx - r, side * r};
        const int n_arc = 8;
        for (int i = 0; i <= n_arc; ++i) {
          const double phi = 0.5 * M_PI * i / n_arc;
          center.push_back({arc_c.x + r * std::sin(phi), arc_c.y - side * r * std::cos(phi)});
        }
        const double up = yext - 8.0 - r;
        const int n_up = static_cast<int>(std::ceil(up / 2.0));
        for (int i = 1; i <= n_up; ++i)
          center.push_back({cx, side * (r + std::min(up, i * 2.0))});
        center = sanitize(center);
      }
      plan.center = center;
      scene.drivable = {{x0, -hw},         {cx - hc, -hw},  {cx - hc, -yext}, {cx + hc, -yext},
                        {cx + hc, -hw},    {x1, -hw},       {x1, hw},         {cx + hc, hw},
                        {cx + hc, yext},   {cx - hc, yext}, {cx - hc, hw},    {x0, hw}};
      // Crossing traffic timed to clear the junction before the ego
      // arrives at cruise speed.
      if (rng.uniform_int(2) == 0) {
        const double t_ego = cx / cruise;
        const double v_a = rng.uniform(5.0, 7.0);
        const double t_cross = t_ego + (rng.uniform_int(2) == 0 ? -3.5 : 4.5);
        const double start_y = -(yext - 4.0);
        // Reaches y=0 at t_cross.
        const double y0 = start_y;
        AgentTrack tr;
        tr.agent_id = "agent-x";
        const double y_at_cross = y0 + v_a * t_cross;
        for (int t = 0; t < kTrackSteps; ++t) {
          double y = y0 + v_a * (t * kSimDt) - y_at_cross;  // y(t_cross) = 0
          y = std::clamp(y, start_y, yext - 4.0);
          tr.poses.push_back({cx - 1.8, y, 0.5 * M_PI});
        }
        agents.push_back(tr);
      }
      break;
    }
    case SceneKind::cut_in: {
      const double length = rng.uniform(50.0, 85.0);
      plan.center = straight_center(length);
      const double side = rng.uniform_int(4) == 0 ? 1.0 : -1.0;  // mostly from the right
      const double lane_off = 3.5 * side;
      if (side > 0) plan.left = 4.6; else plan.right = 4.6;
      CenterRef ref(plan.center);

      const double t_cut = rng.uniform(1.5, 3.0);     // merge completes here
      const double merge_dur = rng.uniform(1.2, 1.8);
      const double t_start = std::max(0.25, t_cut - merge_dur);
      const double v_slow = rng.uniform(3.0, 5.0);
      const double s_a0 = cruise * 1.1 + rng.uniform(4.0, 8.0);

      AgentTrack tr;
      tr.agent_id = "agent-adv";
      tr.adversarial = true;
      double s = s_a0;
      double v = cruise;
      for (int t = 0; t < kTrackSteps; ++t) {
        const double time = t * kSimDt;
        double lateral = lane_off;
        if (time >= t_cut) {
          lateral = 0.0;
        } else if (time > t_start) {
          const double u = (time - t_start) / (t_cut - t_start);
          lateral = lane_off * 0.5 * (1.0 + std::cos(M_PI * u));
        }
        tr.poses.push_back(ref.at(std::min(s, length), lateral));
        if (time >= t_cut && v > v_slow) v = std::max(v_slow, v - 3.0 * kSimDt);
        s += v * kSimDt;
      }
      agents.push_back(tr);
      scene.adversarial = true;
      break;
    }
  }

  if (scene.drivable.empty()) scene.drivable = corridor_ring(plan);

  // World placement: random rotation + offset exercises the frame code;
  // the observation model is ego-relative so learning is unaffected.
  Frame frame;
  frame.rot = rng.uniform(-M_PI, M_PI);
  frame.offset = {std::round(rng.uniform(-200.0, 200.0)), std::round(rng.uniform(-200.0, 200.0))};

  std::vector<Vec2> route_pts;
  route_pts.reserve(plan.center.size());
  for (const Vec2& p : plan.center) route_pts.push_back(quant(frame.apply(p)));
  scene.route = Polyline(route_pts);

  for (Vec2& p : scene.drivable) p = quant(frame.apply(p));
  for (AgentTrack& a : agents) {
    for (Pose2D& p : a.poses) p = quant(frame.apply(p));
  }
  scene.agents = std::move(agents);

  const double start_heading = scene.route.heading_at(0.1);
  const Vec2 start = scene.route.points().front();
  scene.ego_start = {start.x, start.y, start_heading};
  scene.ego_start_speed = kind == SceneKind::cut_in ? 8.0 : rng.uniform(6.5, 8.0);

  scene.validate();
  return scene;
}

}  // namespace mpa
