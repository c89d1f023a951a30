#include "mpa/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpa/parallel.hpp"

namespace mpa {

namespace {

double route_curvature(const Scene& scene, double s) {
  const double ds = 2.0;
  const double h0 = scene.route.heading_at(std::max(0.0, s - 0.5 * ds));
  const double h1 = scene.route.heading_at(std::min(scene.route.length(), s + 0.5 * ds));
  return std::abs(normalize_angle(h1 - h0)) / ds;
}

}  // namespace

TrajectoryAction pure_pursuit_plan(const WorldState& state, const Scene& scene,
                                   const ScriptedPolicyConfig& cfg, int t_fut,
                                   double dt_waypoint) {
  TrajectoryAction traj;
  traj.dt_waypoint = dt_waypoint;
  traj.waypoints.reserve(t_fut);

  const Polyline& route = scene.route;
  const auto proj = route.project(state.ego.pose.position());
  const double route_len = route.length();

  if (proj.s >= route_len - 1e-6) {
    // Past the route end: stop plan at the terminus.
    const Vec2 terminus = world_to_ego(state.ego.pose, route.points().back());
    traj.waypoints.assign(static_cast<std::size_t>(t_fut), terminus);
    return traj;
  }

  const Vec2 offset = state.ego.pose.position() - proj.point;
  double s = proj.s;
  double v_prev = state.ego.v;
  for (int k = 0; k < t_fut; ++k) {
    double v_allow = cfg.cruise_speed;
    const double kappa = route_curvature(scene, s);
    if (kappa > 1e-6) v_allow = std::min(v_allow, std::sqrt(cfg.a_lat_comfort / kappa));
    const double remaining = std::max(0.0, route_len - s);
    const double taper = std::max(std::sqrt(2.0 * cfg.decel_comfort * remaining), cfg.min_speed);
    v_allow = std::min(v_allow, taper);
    const double v_k = std::min(v_allow, v_prev + cfg.accel_comfort * dt_waypoint);
    // Trapezoidal spacing keeps planned positions consistent with an
    // acceleration-limited execution of the speed profile.
    s = std::min(s + 0.5 * (v_prev + v_k) * dt_waypoint, route_len);
    v_prev = v_k;

    const double lin = std::max(0.0, 1.0 - (s - proj.s) / cfg.lookahead);
    const double decay = lin * lin;  // quadratic merge back onto the route
    const Vec2 world = route.point_at(s) + offset * decay;
    traj.waypoints.push_back(world_to_ego(state.ego.pose, world));
  }
  return traj;
}

BasePolicy train_bc(const BcDataset& dataset, const BcConfig& cfg, TrainLog* log) {
  if (dataset.samples.empty()) throw std::invalid_argument("train_bc: empty dataset");

  const int in_dim = static_cast<int>(dataset.samples.front().input.size());
  const int out_dim = 2 * dataset.t_fut;

  Rng rng(derive_seed(cfg.seed, 0xbc));
  BasePolicy policy;
  policy.kind = BasePolicy::Kind::cloned;
  policy.t_fut = dataset.t_fut;
  policy.dt_waypoint = dataset.dt_waypoint;

  std::vector<int> enc_dims = {in_dim};
  enc_dims.insert(enc_dims.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
  std::vector<Activation> enc_acts(enc_dims.size() - 1, Activation::relu);
  policy.encoder = make_net(enc_dims, enc_acts, rng);

  std::vector<int> head_dims = {enc_dims.back()};
  head_dims.insert(head_dims.end(), cfg.head_hidden.begin(), cfg.head_hidden.end());
  head_dims.push_back(out_dim);
  std::vector<Activation> head_acts(head_dims.size() - 1, Activation::relu);
  head_acts.back() = Activation::identity;
  policy.head = make_net(head_dims, head_acts, rng);

  AdamState enc_opt = AdamState::zeros_like(policy.encoder);
  AdamState head_opt = AdamState::zeros_like(policy.head);
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

  const int n = static_cast<int>(dataset.samples.size());
  const int batch = std::min(cfg.batch_size, n);
  std::vector<int> batch_idx(batch);
  const int shards = std::max(1, cfg.workers);
  std::vector<NetGrads> enc_shard(shards), head_shard(shards);
  std::vector<double> loss_shard(shards);

  for (int step = 0; step < cfg.steps; ++step) {
    for (int i = 0; i < batch; ++i) batch_idx[i] = rng.uniform_int(n);
    for (int s = 0; s < shards; ++s) {
      enc_shard[s] = NetGrads::zeros_like(policy.encoder);
      head_shard[s] = NetGrads::zeros_like(policy.head);
      loss_shard[s] = 0.0;
    }
    parallel_shards(batch, shards, [&](int shard, int begin, int end) {
      for (int i = begin; i < end; ++i) {
        const BcSample& sample = dataset.samples[batch_idx[i]];
        ForwardCache ec, hc;
        const Eigen::VectorXd z = forward(policy.encoder, sample.input, &ec);
        const Eigen::VectorXd y = forward(policy.head, z, &hc);
        const Eigen::VectorXd err = y - sample.target;
        loss_shard[shard] += err.squaredNorm();
        const Eigen::VectorXd dz = backward(policy.head, hc, 2.0 * err / batch, head_shard[shard]);
        backward(policy.encoder, ec, dz, enc_shard[shard]);
      }
    });
    for (int s = 1; s < shards; ++s) {
      enc_shard[0].accumulate(enc_shard[s]);
      head_shard[0].accumulate(head_shard[s]);
      loss_shard[0] += loss_shard[s];
    }
    adam_step(policy.encoder, enc_shard[0], enc_opt, adam);
    adam_step(policy.head, head_shard[0], head_opt, adam);
    if (log != nullptr) log->losses.push_back(loss_shard[0] / batch);
  }

  policy.trained = true;
  return policy;
}

TrajectoryAction predict_base(const BasePolicy& policy, const Observation& obs,
                              const EgoHistory& hist, const WorldState* state,
                              const Scene* scene) {
  if (policy.kind == BasePolicy::Kind::scripted) {
    if (state == nullptr || scene == nullptr)
      throw std::invalid_argument("scripted policy needs state and scene");
    return pure_pursuit_plan(*state, *scene, policy.scripted, policy.t_fut, policy.dt_waypoint);
  }
  if (!policy.trained) throw std::logic_error("cloned policy not trained");
  const Eigen::VectorXd z = forward(policy.encoder, policy_input(obs, hist));
  return unflatten_waypoints(forward(policy.head, z), policy.dt_waypoint);
}

ExpertLog rollout_scripted(const Scene& scene, const SimParams& sim, const LqrConfig& lqr,
                           const ScriptedPolicyConfig& expert) {
  ExpertLog log;
  WorldState state = make_initial_state(scene, sim);
  HistoryTracker tracker(sim.t_hist, state);
  log.states.push_back(state);
  while (true) {
    const TerminationKind term = check_termination(state, sim);
    if (term != TerminationKind::running) {
      log.termination = term;
      break;
    }
    ExpertFrame frame;
    frame.state = state;
    frame.obs = render_observation(state, sim);
    frame.hist = tracker.history();
    frame.action = pure_pursuit_plan(state, scene, expert, sim.t_fut, sim.dt_waypoint);

    const TrackCommand cmd = track_trajectory(frame.action, state.ego.v, sim.dt, sim, lqr);
    state = step_dynamics(state, {cmd.accel, cmd.steer}, sim);
    tracker.push(state);
    log.frames.push_back(std::move(frame));
    log.states.push_back(state);
  }
  return log;
}

void append_bc_samples(const ExpertLog& log, BcDataset& dataset) {
  for (const ExpertFrame& f : log.frames) {
    BcSample s;
    s.input = policy_input(f.obs, f.hist);
    s.target = flatten_waypoints(f.action);
    dataset.samples.push_back(std::move(s));
  }
}

}  // namespace mpa
