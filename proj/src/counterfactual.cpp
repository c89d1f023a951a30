#include "mpa/counterfactual.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

#include "mpa/parallel.hpp"

namespace mpa {

PolicyFn make_policy_fn(const BasePolicy& policy, const Scene& scene) {
  return [&policy, &scene](const WorldState& state, const Observation& obs,
                           const EgoHistory& hist) {
    return predict_base(policy, obs, hist, &state, &scene);
  };
}

namespace {

double signed_lateral(const Scene& scene, const Vec2& pos) {
  const auto proj = scene.route.project(pos);
  const double th = scene.route.heading_at(proj.s);
  const Vec2 n{-std::sin(th), std::cos(th)};
  return n.dot(pos - proj.point);
}

struct Node {
  int parent = -1;
  int depth = 0;  // segment-local step of the decision state
  WorldState state;
  EgoHistory hist;
  double cum_weighted = 0.0;
  bool terminal = false;  // state may not be extended
  bool has_record = false;
  TransitionRecord record;
  // Children bookkeeping filled during expansion.
  std::vector<int> beam_children;
  bool has_closure = false;
  RewardVector closure_reward;
  double closure_weighted = -std::numeric_limits<double>::infinity();
};

struct Candidate {
  Node node;
  int order = 0;  // stable tie-break: parent beam slot * branches + branch
};

}  // namespace

CounterfactualDataset generate_counterfactuals(const Scene& scene, const PolicyFn& base,
                                               const CounterfactualConfig& cfg,
                                               const SimParams& sim, const RewardConfig& reward,
                                               const LqrConfig& lqr,
                                               const ScriptedPolicyConfig& expert) {
  if (cfg.t_rollout < 1 || cfg.beam_width < 1 || cfg.branches_per_step < 1 || cfg.delta_max < 0.0)
    throw std::invalid_argument("invalid counterfactual config");

  CounterfactualDataset ds;
  ds.manifest.seed = cfg.seed;
  ds.manifest.scene_count = 1;

  const ExpertLog ref = rollout_scripted(scene, sim, lqr, expert);
  if (ref.frames.empty()) return ds;

  // Reference lateral offsets per step, for the deviation check.
  std::vector<double> ref_lat(ref.states.size());
  for (std::size_t i = 0; i < ref.states.size(); ++i)
    ref_lat[i] = signed_lateral(scene, ref.states[i].ego.pose.position());

  Rng rng(derive_seed(cfg.seed, splitmix64(std::hash<std::string>{}(scene.scene_id))));
  long mode_counter = 0;
  const int n_modes = cfg.grid.modes();

  for (std::size_t t0 = 0; t0 < ref.frames.size(); t0 += cfg.t_rollout) {
    std::vector<Node> pool;
    Node root;
    root.state = ref.states[t0];
    root.hist = ref.frames[t0].hist;
    pool.push_back(std::move(root));
    std::vector<int> beam = {0};

    for (int step = 0; step < cfg.t_rollout && !beam.empty(); ++step) {
      std::vector<Candidate> admitted;
      int order = 0;
      for (const int node_id : beam) {
        if (pool[node_id].terminal) continue;
        // Snapshot what branch expansion needs; pool may reallocate.
        const WorldState parent_state = pool[node_id].state;
        const EgoHistory parent_hist = pool[node_id].hist;
        const double parent_cum = pool[node_id].cum_weighted;
        const int parent_depth = pool[node_id].depth;
        const double parent_dev =
            std::abs(signed_lateral(scene, parent_state.ego.pose.position()) -
                     ref_lat[std::min(t0 + parent_depth, ref_lat.size() - 1)]);

        const Observation obs = render_observation(parent_state, sim);
        TrajectoryAction a_base;
        try {
          a_base = base(parent_state, obs, parent_hist);
          if (!a_base.finite() || a_base.waypoints.size() != static_cast<std::size_t>(sim.t_fut))
            throw std::runtime_error("malformed base action");
        } catch (const std::exception&) {
          ds.manifest.policy_failures += 1;
          continue;
        }

        for (int b = 0; b < cfg.branches_per_step; ++b) {
          const int mode_target = static_cast<int>(mode_counter++ % n_modes);
          const int rb = mode_target / cfg.grid.warp_bins;
          const int wb = mode_target % cfg.grid.warp_bins;
          AugmentationParams params;
          const double rot_width =
              (cfg.aug.rotation_max_deg - cfg.aug.rotation_min_deg) / cfg.grid.rotation_bins;
          const double warp_width = (cfg.aug.warp_max - cfg.aug.warp_min) / cfg.grid.warp_bins;
          params.rotation_deg = cfg.aug.rotation_min_deg + (rb + rng.uniform()) * rot_width;
          params.warp = cfg.aug.warp_min + (wb + rng.uniform()) * warp_width;
          params.rotation_deg =
              std::clamp(params.rotation_deg, cfg.aug.rotation_min_deg, cfg.aug.rotation_max_deg);
          params.warp = std::clamp(params.warp, cfg.aug.warp_min, cfg.aug.warp_max);
          params.noise_std = cfg.noise_std;
          params.rng_seed = rng.next_u64();

          const TrajectoryAction applied = transform_trajectory(a_base, params, cfg.aug);
          const TrackCommand cmd = track_trajectory(applied, parent_state.ego.v, sim.dt, sim, lqr);
          const WorldState next = step_dynamics(parent_state, {cmd.accel, cmd.steer}, sim);
          const RewardVector r = step_reward(parent_state, next, reward, sim);
          const double wr = weighted_reward(r, cfg.weights);

          const bool admissible = parent_dev <= cfg.delta_max && wr >= cfg.reward_cutoff;
          if (!admissible) {
            Node& parent = pool[node_id];
            if (!parent.has_closure || wr > parent.closure_weighted) {
              parent.has_closure = true;
              parent.closure_reward = r;
              parent.closure_weighted = wr;
            }
            continue;
          }

          Candidate cand;
          cand.order = order++;
          Node& node = cand.node;
          node.parent = node_id;
          node.depth = parent_depth + 1;
          node.state = next;
          node.hist = parent_hist;
          node.hist.frames.erase(node.hist.frames.begin());
          node.hist.frames.push_back(make_history_frame(next));
          node.cum_weighted = parent_cum + wr;
          node.terminal = check_termination(next, sim) != TerminationKind::running ||
                          node.depth >= cfg.t_rollout;
          node.has_record = true;
          TransitionRecord& rec = node.record;
          rec.scene_id = scene.scene_id;
          rec.t = parent_state.t;
          rec.ego_history = parent_hist;
          rec.observation = obs;
          rec.base_action = a_base;
          rec.applied_action = applied;
          rec.residual = residual_between(applied, a_base);
          rec.mode = mode_of(params, cfg.grid, cfg.aug);
          rec.rewards = r;
          rec.ref_deviation = parent_dev;
          admitted.push_back(std::move(cand));
        }
      }

      // Prune to beam width by cumulative weighted reward; stable on
      // the expansion order.
      std::stable_sort(admitted.begin(), admitted.end(), [](const Candidate& a, const Candidate& b) {
        return a.node.cum_weighted > b.node.cum_weighted;
      });
      if (static_cast<int>(admitted.size()) > cfg.beam_width) admitted.resize(cfg.beam_width);

      beam.clear();
      for (Candidate& cand : admitted) {
        const int id = static_cast<int>(pool.size());
        pool.push_back(std::move(cand.node));
        pool[pool[id].parent].beam_children.push_back(id);
        beam.push_back(id);
      }
    }

    // Label windows along the best recorded continuation of each node;
    // a rejected continuation's reward closes the window of a node with
    // no recorded children.
    std::vector<double> subtree_best(pool.size());
    for (std::size_t i = pool.size(); i-- > 0;) {
      double best = pool[i].cum_weighted;
      for (const int c : pool[i].beam_children) best = std::max(best, subtree_best[c]);
      subtree_best[i] = best;
    }
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!pool[i].has_record) continue;
      Node& node = pool[i];
      std::vector<RewardVector> window = {node.record.rewards};
      const Node* cur = &node;
      while (static_cast<int>(window.size()) < reward.label_horizon) {
        int best_child = -1;
        double best_val = -std::numeric_limits<double>::infinity();
        for (const int c : cur->beam_children) {
          if (subtree_best[c] > best_val) {
            best_val = subtree_best[c];
            best_child = c;
          }
        }
        if (best_child >= 0) {
          cur = &pool[best_child];
          window.push_back(cur->record.rewards);
        } else {
          if (cur->has_closure) window.push_back(cur->closure_reward);
          break;
        }
      }
      node.record.terminal_flag = node.beam_children.empty();
      node.record.reward_window = window;
      node.record.q_labels = discounted_q_label(window, reward);
      ds.records.push_back(std::move(node.record));
    }
  }

  ds.manifest.record_count = ds.records.size();
  return ds;
}

CounterfactualDataset generate_dataset(const std::vector<Scene>& scenes, const BasePolicy& base,
                                       const CounterfactualConfig& cfg, const SimParams& sim,
                                       const RewardConfig& reward, const LqrConfig& lqr,
                                       const ScriptedPolicyConfig& expert, int workers) {
  std::vector<CounterfactualDataset> parts(scenes.size());
  parallel_for(static_cast<int>(scenes.size()), workers, [&](int i) {
    const PolicyFn fn = make_policy_fn(base, scenes[i]);
    parts[i] = generate_counterfactuals(scenes[i], fn, cfg, sim, reward, lqr, expert);
  });
  CounterfactualDataset out;
  out.manifest.seed = cfg.seed;
  out.manifest.scene_count = scenes.size();
  for (CounterfactualDataset& part : parts) {
    out.manifest.policy_failures += part.manifest.policy_failures;
    for (TransitionRecord& r : part.records) out.records.push_back(std::move(r));
  }
  out.manifest.record_count = out.records.size();
  return out;
}

FilterReason filter_record(const TransitionRecord& record, const CounterfactualConfig& cfg) {
  if (record.ref_deviation > cfg.delta_max) return FilterReason::too_far;
  if (weighted_reward(record.rewards, cfg.weights) < cfg.reward_cutoff)
    return FilterReason::low_reward;
  return FilterReason::keep;
}

namespace {

bool collision_free_window(const TransitionRecord& r) {
  for (const RewardVector& w : r.reward_window) {
    if (w.r_collision != 0.0) return false;
  }
  return true;
}

}  // namespace

DatasetSplit split_dataset(const CounterfactualDataset& ds) {
  DatasetSplit split;
  for (const TransitionRecord& r : ds.records) {
    split.q_split.push_back(&r);
    if (collision_free_window(r)) split.adapter_split.push_back(&r);
  }
  return split;
}

std::vector<const TransitionRecord*> adapter_training_pairs(const CounterfactualDataset& ds,
                                                            const QWeights& weights) {
  std::map<std::pair<std::string, int>, const TransitionRecord*> best;
  for (const TransitionRecord& r : ds.records) {
    if (!collision_free_window(r)) continue;
    const auto key = std::make_pair(r.scene_id, r.t);
    const auto it = best.find(key);
    if (it == best.end()) {
      best[key] = &r;
      continue;
    }
    const double cur = weighted_labels(r.q_labels, weights);
    const double prev = weighted_labels(it->second->q_labels, weights);
    if (cur > prev || (cur == prev && r.mode < it->second->mode)) it->second = &r;
  }
  std::vector<const TransitionRecord*> out;
  out.reserve(best.size());
  for (const auto& [key, rec] : best) out.push_back(rec);
  return out;
}

}  // namespace mpa
