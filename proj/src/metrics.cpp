#include "mpa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpa/parallel.hpp"

namespace mpa {

double dac_score_from_ratio(double inside_ratio) {
  if (inside_ratio < 0.3) return 0.0;
  if (inside_ratio <= 0.5) return 0.5;
  return 1.0;
}

namespace {

Vec2 velocity_of(const Pose2D& now, const Pose2D& prev, double dt) {
  return {(now.x - prev.x) / dt, (now.y - prev.y) / dt};
}

bool ttc_violation(const WorldState& curr, const MetricsConfig& cfg, const SimParams& sim) {
  const int steps = static_cast<int>(std::round(cfg.ttc_window / sim.dt));
  if (steps < 1 || curr.agents_now.empty()) return false;
  const Vec2 ego_vel = rotate({curr.ego.v, 0.0}, curr.ego.pose.yaw);
  const std::vector<AgentPoseNow> prev_agents = agent_poses_at(*curr.scene, std::max(0, curr.t - 1));
  for (int k = 1; k <= steps; ++k) {
    const double tau = k * sim.dt;
    OrientedRect ego = ego_rect(curr, sim);
    ego.center.x += ego_vel.x * tau;
    ego.center.y += ego_vel.y * tau;
    for (std::size_t i = 0; i < curr.agents_now.size(); ++i) {
      const AgentPoseNow& a = curr.agents_now[i];
      const AgentTrack& track = curr.scene->agents[a.agent_index];
      const Vec2 vel = velocity_of(a.pose, prev_agents[i].pose, sim.dt);
      Pose2D proj = a.pose;
      proj.x += vel.x * tau;
      proj.y += vel.y * tau;
      if (rects_overlap(ego, agent_rect(track, proj))) return true;
    }
  }
  return false;
}

}  // namespace

FrameScores frame_scores(std::span<const WorldState> history, const WorldState& curr,
                         const MetricsConfig& cfg, const SimParams& sim) {
  FrameScores s;

  const OrientedRect inflated = ego_rect(curr, sim).inflated(sim.nc_inflation);
  for (const AgentPoseNow& a : curr.agents_now) {
    const AgentTrack& track = curr.scene->agents[a.agent_index];
    if (rects_overlap(inflated, agent_rect(track, a.pose))) {
      s.nc = 0.0;
      break;
    }
  }

  s.dac = dac_score_from_ratio(drivable_inside_ratio(curr, sim));
  s.ttc = ttc_violation(curr, cfg, sim) ? 0.0 : 1.0;

  // Comfort from finite differences over the available window.
  const double dt = sim.dt;
  const std::size_t h = history.size();
  double a_lon = 0.0, yaw_rate = 0.0, yaw_accel = 0.0, jerk = 0.0;
  if (h >= 1) {
    a_lon = (curr.ego.v - history[h - 1].ego.v) / dt;
    yaw_rate = normalize_angle(curr.ego.pose.yaw - history[h - 1].ego.pose.yaw) / dt;
  }
  if (h >= 2) {
    const double prev_a = (history[h - 1].ego.v - history[h - 2].ego.v) / dt;
    const double prev_yr =
        normalize_angle(history[h - 1].ego.pose.yaw - history[h - 2].ego.pose.yaw) / dt;
    jerk = (a_lon - prev_a) / dt;
    yaw_accel = (yaw_rate - prev_yr) / dt;
  }
  const double a_lat = curr.ego.v * yaw_rate;
  const bool comfortable = a_lon >= cfg.a_lon_min && a_lon <= cfg.a_lon_max &&
                           std::abs(a_lat) <= cfg.a_lat_max &&
                           std::abs(yaw_rate) <= cfg.yaw_rate_max &&
                           std::abs(yaw_accel) <= cfg.yaw_accel_max &&
                           std::abs(jerk) <= cfg.jerk_max;
  s.com = comfortable ? 1.0 : 0.0;
  return s;
}

EpisodeMetrics episode_metrics(std::span<const FrameScores> frames, double rc_fraction,
                               const MetricsConfig& cfg) {
  if (frames.empty()) throw std::invalid_argument("episode_metrics: no frames");
  EpisodeMetrics m;
  m.frames = static_cast<int>(frames.size());
  m.rc = 100.0 * std::clamp(rc_fraction, 0.0, 1.0);
  const double wsum = cfg.weight_ttc + cfg.weight_com;
  double term_sum = 0.0;
  for (const FrameScores& f : frames) {
    m.nc += f.nc;
    m.dac += f.dac;
    m.ttc += f.ttc;
    m.com += f.com;
    term_sum += f.nc * f.dac * (cfg.weight_ttc * f.ttc + cfg.weight_com * f.com) / wsum;
  }
  const double n = static_cast<double>(m.frames);
  m.nc = 100.0 * m.nc / n;
  m.dac = 100.0 * m.dac / n;
  m.ttc = 100.0 * m.ttc / n;
  m.com = 100.0 * m.com / n;
  m.hdscore = m.rc * (term_sum / n);
  return m;
}

namespace {

EpisodeTrace run_episode(const PolicyStack& stack, const Scene& scene, const EvalConfig& cfg,
                         std::uint64_t episode_seed) {
  EpisodeTrace trace;
  trace.scene_id = scene.scene_id;
  Rng rng(episode_seed);

  WorldState state = make_initial_state(scene, cfg.sim);
  HistoryTracker tracker(cfg.sim.t_hist, state);
  std::vector<WorldState> recent = {state};
  std::vector<FrameScores> frames;

  TerminationKind term = check_termination(state, cfg.sim);
  while (term == TerminationKind::running) {
    const Observation obs = render_observation(state, cfg.sim);
    const EgoHistory& hist = tracker.history();
    TrajectoryAction action = predict_base(*stack.base, obs, hist, &state, &scene);

    TraceFrame tf;
    tf.t = state.t;
    tf.chosen_candidate = -1;
    if (stack.adapter != nullptr && stack.q != nullptr && stack.samples > 0) {
      const std::vector<ResidualAction> candidates = ddim_sample(
          *stack.adapter, obs, hist, action, stack.ddim_steps, stack.samples, rng);
      const SelectionResult sel = select_best(*stack.q, obs, hist, action, candidates);
      action = apply_residual(action, sel.chosen);
      tf.chosen_candidate = sel.index;
      tf.q_table.reserve(sel.table.size());
      for (const QBreakdown& q : sel.table) tf.q_table.push_back(q.combined);
    }

    const TrackCommand cmd = track_trajectory(action, state.ego.v, cfg.sim.dt, cfg.sim, cfg.lqr);
    state = step_dynamics(state, {cmd.accel, cmd.steer}, cfg.sim);
    tracker.push(state);

    const std::size_t nh = recent.size();
    const std::span<const WorldState> hist_span(recent.data() + (nh > 3 ? nh - 3 : 0),
                                                nh > 3 ? 3 : nh);
    const FrameScores fs = frame_scores(hist_span, state, cfg.metrics, cfg.sim);
    frames.push_back(fs);

    tf.ego = state.ego.pose;
    tf.v = state.ego.v;
    tf.action = action;
    tf.scores = fs;
    trace.frames.push_back(std::move(tf));

    recent.push_back(state);
    if (recent.size() > 8) recent.erase(recent.begin());
    term = check_termination(state, cfg.sim);
  }

  const double fraction = term == TerminationKind::route_complete
                              ? 1.0
                              : state.route_progress / scene.route.length();
  if (!frames.empty()) {
    trace.metrics = episode_metrics(frames, fraction, cfg.metrics);
  } else {
    trace.metrics.rc = 100.0 * std::clamp(fraction, 0.0, 1.0);
  }
  trace.metrics.termination = term;
  return trace;
}

void check_stack(const PolicyStack& stack, const EvalConfig& cfg) {
  if (stack.base == nullptr) throw std::invalid_argument("run_closed_loop: no base policy");
  if ((stack.adapter == nullptr) != (stack.q == nullptr))
    throw std::invalid_argument("run_closed_loop: adapter and q model must come together");
  const int in_dim = observation_feature_dim(cfg.sim) + history_feature_dim(cfg.sim.t_hist);
  if (stack.base->kind == BasePolicy::Kind::cloned && stack.base->encoder.input_dim() != in_dim)
    throw std::invalid_argument("base policy checkpoint incompatible with sim config");
  if (stack.adapter != nullptr) {
    if (!stack.adapter->trained || !stack.q->trained)
      throw std::invalid_argument("untrained adapter or q model");
    if (stack.adapter->encoder.input_dim() != in_dim || stack.q->encoder.input_dim() != in_dim)
      throw std::invalid_argument("adapter/q checkpoint incompatible with sim config");
    if (stack.adapter->t_fut != cfg.sim.t_fut || stack.q->t_fut != cfg.sim.t_fut)
      throw std::invalid_argument("checkpoint horizon mismatch");
  }
}

}  // namespace

EvalResult run_closed_loop(const PolicyStack& stack, const std::vector<Scene>& scenes,
                           const EvalConfig& cfg, std::uint64_t seed) {
  check_stack(stack, cfg);
  EvalResult result;
  result.episodes.resize(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), cfg.workers, [&](int i) {
    result.episodes[i] =
        run_episode(stack, scenes[i], cfg, derive_seed(seed, static_cast<std::uint64_t>(i)));
  });

  EpisodeMetrics& mean = result.mean;
  for (const EpisodeTrace& e : result.episodes) {
    mean.rc += e.metrics.rc;
    mean.nc += e.metrics.nc;
    mean.dac += e.metrics.dac;
    mean.ttc += e.metrics.ttc;
    mean.com += e.metrics.com;
    mean.hdscore += e.metrics.hdscore;
    mean.frames += e.metrics.frames;
  }
  const double n = std::max<std::size_t>(1, result.episodes.size());
  mean.rc /= n;
  mean.nc /= n;
  mean.dac /= n;
  mean.ttc /= n;
  mean.com /= n;
  mean.hdscore /= n;
  return result;
}

std::vector<L2Row> open_vs_closed_l2(const BasePolicy& policy, const std::vector<Scene>& scenes,
                                     std::span<const double> horizons_s, const EvalConfig& cfg,
                                     int stride) {
  std::vector<L2Row> rows;
  rows.reserve(horizons_s.size());
  for (const double h : horizons_s) rows.push_back({h, 0.0, 0.0});
  if (scenes.empty()) return rows;

  const double dt_way = cfg.sim.dt_waypoint;
  const int steps_per_waypoint = static_cast<int>(std::round(dt_way / cfg.sim.dt));
  double max_h = 0.0;
  for (const double h : horizons_s) max_h = std::max(max_h, h);
  const int max_steps = static_cast<int>(std::round(max_h / cfg.sim.dt));

  std::vector<std::vector<double>> open_acc(scenes.size()), closed_acc(scenes.size());
  std::vector<std::vector<long>> count_acc(scenes.size());

  parallel_for(static_cast<int>(scenes.size()), cfg.workers, [&](int si) {
    const Scene& scene = scenes[si];
    open_acc[si].assign(horizons_s.size(), 0.0);
    closed_acc[si].assign(horizons_s.size(), 0.0);
    count_acc[si].assign(horizons_s.size(), 0);

    const ScriptedPolicyConfig expert_cfg;  // reference logs use defaults
    const ExpertLog log = rollout_scripted(scene, cfg.sim, cfg.lqr, expert_cfg);
    const int n = static_cast<int>(log.frames.size());
    for (int t0 = 0; t0 + max_steps < n; t0 += stride) {
      // Open loop: one plan, compared to the expert's executed future.
      const ExpertFrame& f = log.frames[t0];
      const TrajectoryAction plan =
          predict_base(policy, f.obs, f.hist, &log.states[t0], &scene);

      // Closed loop: roll the policy out from the same state, warm
      // started with the expert's own history window.
      std::vector<Vec2> executed(max_steps);
      {
        WorldState state = log.states[t0];
        EgoHistory warm = f.hist;
        for (int k = 0; k < max_steps; ++k) {
          const Observation obs = render_observation(state, cfg.sim);
          const TrajectoryAction action = predict_base(policy, obs, warm, &state, &scene);
          const TrackCommand cmd =
              track_trajectory(action, state.ego.v, cfg.sim.dt, cfg.sim, cfg.lqr);
          state = step_dynamics(state, {cmd.accel, cmd.steer}, cfg.sim);
          warm.frames.erase(warm.frames.begin());
          warm.frames.push_back(make_history_frame(state));
          executed[k] = state.ego.pose.position();
          if (check_termination(state, cfg.sim) != TerminationKind::running) {
            for (int j = k + 1; j < max_steps; ++j) executed[j] = executed[k];
            break;
          }
        }
      }

      for (std::size_t hi = 0; hi < horizons_s.size(); ++hi) {
        const int n_way = std::min(static_cast<int>(std::round(horizons_s[hi] / dt_way)),
                                   static_cast<int>(plan.waypoints.size()));
        if (n_way == 0) {
          count_acc[si][hi] += 1;
          continue;
        }
        double open_err = 0.0;
        double closed_err = 0.0;
        for (int w = 1; w <= n_way; ++w) {
          const int step = t0 + w * steps_per_waypoint;
          const Vec2 expert_pos = log.states[step].ego.pose.position();
          const Vec2 plan_world =
              ego_to_world(log.states[t0].ego.pose, plan.waypoints[w - 1]);
          open_err += (plan_world - expert_pos).norm();
          closed_err += (executed[w * steps_per_waypoint - 1] - expert_pos).norm();
        }
        open_acc[si][hi] += open_err / n_way;
        closed_acc[si][hi] += closed_err / n_way;
        count_acc[si][hi] += 1;
      }
    }
  });

  for (std::size_t hi = 0; hi < horizons_s.size(); ++hi) {
    double open_sum = 0.0, closed_sum = 0.0;
    long count = 0;
    for (std::size_t si = 0; si < scenes.size(); ++si) {
      open_sum += open_acc[si][hi];
      closed_sum += closed_acc[si][hi];
      count += count_acc[si][hi];
    }
    if (count > 0) {
      rows[hi].open_l2 = open_sum / count;
      rows[hi].closed_l2 = closed_sum / count;
    }
  }
  return rows;
}

}  // namespace mpa
