#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mpa/policy.hpp"

using namespace mpa;

namespace {

Scene straight_scene(double length = 120.0) {
  Scene s;
  s.scene_id = "pol-straight";
  std::vector<Vec2> pts;
  for (double x = 0.0; x <= length; x += 2.0) pts.push_back({x, 0.0});
  s.route = Polyline(pts);
  s.drivable = {{-6, -3.5}, {length + 6, -3.5}, {length + 6, 3.5}, {-6, 3.5}};
  s.ego_start = {0, 0, 0};
  s.ego_start_speed = 8.0;
  return s;
}

Scene arc_scene(double radius = 45.0) {
  Scene s;
  s.scene_id = "pol-arc";
  std::vector<Vec2> pts;
  for (double ang = 0.0; ang <= 1.6; ang += 2.0 / radius)
    pts.push_back({radius * std::sin(ang), radius * (1.0 - std::cos(ang))});
  s.route = Polyline(pts);
  s.drivable = {{-10, -10}, {radius + 10, -10}, {radius + 10, radius + 10}, {-10, radius + 10}};
  s.ego_start = {0, 0, 0};
  s.ego_start_speed = 8.0;
  return s;
}

}  // namespace

TEST_CASE("pure pursuit on a straight route at cruise speed") {
  const Scene scene = straight_scene();
  const SimParams sim;
  const ScriptedPolicyConfig cfg;
  WorldState state = make_initial_state(scene, sim);
  state.ego.pose = {20.0, 0.0, 0.0};
  state.route_progress = 20.0;
  state.ego.v = cfg.cruise_speed;

  const TrajectoryAction plan = pure_pursuit_plan(state, scene, cfg, sim.t_fut, sim.dt_waypoint);
  REQUIRE(plan.waypoints.size() == 6);
  const double spacing = cfg.cruise_speed * sim.dt_waypoint;
  for (int i = 0; i < 6; ++i) {
    CHECK(plan.waypoints[i].x == doctest::Approx(spacing * (i + 1)).epsilon(1e-9));
    CHECK(plan.waypoints[i].y == doctest::Approx(0.0));
  }
}

TEST_CASE("pure pursuit stops at the route end") {
  const Scene scene = straight_scene(60.0);
  const SimParams sim;
  WorldState state = make_initial_state(scene, sim);
  state.ego.pose = {60.5, 0.0, 0.0};
  state.route_progress = 60.0;
  const TrajectoryAction plan =
      pure_pursuit_plan(state, scene, ScriptedPolicyConfig{}, sim.t_fut, sim.dt_waypoint);
  for (const Vec2& w : plan.waypoints) {
    CHECK(w.x == doctest::Approx(-0.5));
    CHECK(w.y == doctest::Approx(0.0));
  }
}

TEST_CASE("pure pursuit waypoints lie on curved routes") {
  const Scene scene = arc_scene();
  const SimParams sim;
  WorldState state = make_initial_state(scene, sim);
  state.ego.pose = {scene.route.point_at(10.0).x, scene.route.point_at(10.0).y,
                    scene.route.heading_at(10.0)};
  state.route_progress = 10.0;
  state.ego.v = 8.0;
  const TrajectoryAction plan =
      pure_pursuit_plan(state, scene, ScriptedPolicyConfig{}, sim.t_fut, sim.dt_waypoint);
  for (const Vec2& w : plan.waypoints) {
    const Vec2 world = ego_to_world(state.ego.pose, w);
    CHECK(scene.route.project(world).dist < 0.05);
  }
}

TEST_CASE("pure pursuit tapers speed into the route end") {
  const Scene scene = straight_scene(60.0);
  const SimParams sim;
  WorldState state = make_initial_state(scene, sim);
  state.ego.pose = {55.0, 0.0, 0.0};
  state.route_progress = 55.0;
  state.ego.v = 8.0;
  const TrajectoryAction plan =
      pure_pursuit_plan(state, scene, ScriptedPolicyConfig{}, sim.t_fut, sim.dt_waypoint);
  double prev = 55.0;
  std::vector<double> speeds;
  for (const Vec2& w : plan.waypoints) {
    const double s = scene.route.project(ego_to_world(state.ego.pose, w)).s;
    speeds.push_back((s - prev) / sim.dt_waypoint);
    prev = s;
  }
  CHECK(speeds.back() < speeds.front());
  CHECK(speeds.back() < 4.0);
}

TEST_CASE("behavior cloning memorizes a single repeated sample") {
  BcDataset data;
  data.t_fut = 6;
  data.dt_waypoint = 0.5;
  BcSample s;
  s.input = Eigen::VectorXd::Zero(20);
  s.input << 1, -1, 0.5, 2, 0, 0, 1, 0, 0, 1, -0.5, 0, 0, 0, 2, 1, 0, 0, 0, 1;
  s.target = Eigen::VectorXd::LinSpaced(12, 0.1, 1.2);
  data.samples.push_back(s);

  BcConfig cfg;
  cfg.encoder_hidden = {16};
  cfg.head_hidden = {16};
  cfg.steps = 800;
  cfg.batch_size = 4;
  cfg.lr = 3e-3;
  TrainLog log;
  const BasePolicy policy = train_bc(data, cfg, &log);
  CHECK(policy.trained);
  CHECK(log.losses.back() < 1e-4);
}

TEST_CASE("train_bc rejects an empty dataset") {
  CHECK_THROWS(train_bc(BcDataset{}, BcConfig{}));
}

TEST_CASE("scripted predict_base delegates to pure pursuit") {
  const Scene scene = straight_scene();
  const SimParams sim;
  const WorldState state = make_initial_state(scene, sim);
  const Observation obs = render_observation(state, sim);
  HistoryTracker tracker(sim.t_hist, state);

  BasePolicy scripted;
  scripted.kind = BasePolicy::Kind::scripted;
  scripted.t_fut = sim.t_fut;
  scripted.dt_waypoint = sim.dt_waypoint;
  const TrajectoryAction a = predict_base(scripted, obs, tracker.history(), &state, &scene);
  const TrajectoryAction b =
      pure_pursuit_plan(state, scene, scripted.scripted, sim.t_fut, sim.dt_waypoint);
  REQUIRE(a.waypoints.size() == b.waypoints.size());
  for (std::size_t i = 0; i < a.waypoints.size(); ++i) {
    CHECK(a.waypoints[i].x == b.waypoints[i].x);
    CHECK(a.waypoints[i].y == b.waypoints[i].y);
  }
}

TEST_CASE("cloned policy: deterministic, shape contract, open-loop quality") {
  // Train on scripted-expert logs from two scenes; validate on a third.
  const SimParams sim;
  const LqrConfig lqr;
  const ScriptedPolicyConfig expert;

  BcDataset data;
  data.t_fut = sim.t_fut;
  data.dt_waypoint = sim.dt_waypoint;
  const Scene s1 = straight_scene(80.0);
  const Scene s2 = arc_scene(50.0);
  const ExpertLog log1 = rollout_scripted(s1, sim, lqr, expert);
  const ExpertLog log2 = rollout_scripted(s2, sim, lqr, expert);
  append_bc_samples(log1, data);
  append_bc_samples(log2, data);
  REQUIRE(data.samples.size() > 40);

  BcConfig cfg;
  cfg.encoder_hidden = {64, 32};
  cfg.head_hidden = {32};
  cfg.steps = 1200;
  cfg.batch_size = 32;
  cfg.lr = 2e-3;
  const BasePolicy policy = train_bc(data, cfg);

  const Scene val = arc_scene(40.0);
  const ExpertLog vlog = rollout_scripted(val, sim, lqr, expert);
  REQUIRE(!vlog.frames.empty());

  SUBCASE("same input twice gives identical output") {
    const ExpertFrame& f = vlog.frames[4];
    const TrajectoryAction a = predict_base(policy, f.obs, f.hist, nullptr, nullptr);
    const TrajectoryAction b = predict_base(policy, f.obs, f.hist, nullptr, nullptr);
    for (std::size_t i = 0; i < a.waypoints.size(); ++i) {
      CHECK(a.waypoints[i].x == b.waypoints[i].x);
      CHECK(a.waypoints[i].y == b.waypoints[i].y);
    }
  }

  SUBCASE("output length is always t_fut") {
    for (std::size_t i = 0; i < vlog.frames.size(); i += 5) {
      const TrajectoryAction a =
          predict_base(policy, vlog.frames[i].obs, vlog.frames[i].hist, nullptr, nullptr);
      CHECK(a.waypoints.size() == static_cast<std::size_t>(sim.t_fut));
    }
  }

  SUBCASE("held-out open-loop error is small and beats shuffled labels") {
    double err = 0.0;
    int count = 0;
    for (std::size_t i = 0; i + 12 < vlog.frames.size(); i += 4) {
      const ExpertFrame& f = vlog.frames[i];
      const TrajectoryAction plan = predict_base(policy, f.obs, f.hist, nullptr, nullptr);
      err += trajectory_l2(plan, f.action, sim.t_fut);
      ++count;
    }
    err /= count;
    CHECK(err < 0.5);

    // Negative control: shuffled targets destroy the mapping.
    BcDataset shuffled = data;
    Rng rng(123);
    for (std::size_t i = shuffled.samples.size(); i-- > 1;) {
      const int j = rng.uniform_int(static_cast<int>(i) + 1);
      std::swap(shuffled.samples[i].target, shuffled.samples[j].target);
    }
    const BasePolicy junk = train_bc(shuffled, cfg);
    double junk_err = 0.0;
    for (std::size_t i = 0; i + 12 < vlog.frames.size(); i += 4) {
      const ExpertFrame& f = vlog.frames[i];
      const TrajectoryAction plan = predict_base(junk, f.obs, f.hist, nullptr, nullptr);
      junk_err += trajectory_l2(plan, f.action, sim.t_fut);
    }
    junk_err /= count;
    CHECK(junk_err >= 5.0 * err);
  }
}
