#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mpa/policy.hpp"
#include "mpa/rewards.hpp"

namespace mpa {

using PolicyFn =
    std::function<TrajectoryAction(const WorldState&, const Observation&, const EgoHistory&)>;

PolicyFn make_policy_fn(const BasePolicy& policy, const Scene& scene);

struct CounterfactualConfig {
  int t_rollout = 5;           // steps per teacher-forced segment
  double delta_max = 0.6;      // admissible lateral deviation from the reference, m
  double reward_cutoff = -0.5; // minimum weighted step reward (r_c)
  int beam_width = 8;
  int branches_per_step = 7;
  AugmentationRanges aug;
  double noise_std = 0.05;     // augmentation noise, m
  ModeGrid grid{2, 3};
  QWeights weights;
  std::uint64_t seed = 0;
};

// One counterfactual sample. `rewards` is the realized step reward of
// this transition; `reward_window` is the forward window (this step
// first) the q_labels are computed from, so labels stay re-derivable.
// `ref_deviation` is the lateral deviation of the decision state from
// the reference state at the same step.
struct TransitionRecord {
  std::string scene_id;
  int t = 0;
  EgoHistory ego_history;
  Observation observation;
  TrajectoryAction base_action;
  TrajectoryAction applied_action;
  ResidualAction residual;
  int mode = 0;
  RewardVector rewards;
  QLabels q_labels;
  std::vector<RewardVector> reward_window;
  double ref_deviation = 0.0;
  bool terminal_flag = false;
};

struct DatasetManifest {
  std::string version = "mpa-cf-v1";
  std::uint64_t seed = 0;
  std::size_t record_count = 0;
  std::size_t scene_count = 0;
  std::size_t policy_failures = 0;
  std::string config_json;  // config snapshot
  std::string config_hash;
};

struct CounterfactualDataset {
  std::vector<TransitionRecord> records;
  DatasetManifest manifest;
};

// Beam-searched counterfactual rollouts of one scene: teacher-forced
// restarts from the reference log every t_rollout steps; each beam
// node queries the base policy once and branches over stratified
// augmentation modes; branches are admitted when the decision state is
// within delta_max of the reference and the realized weighted reward
// clears reward_cutoff, then pruned to beam_width by cumulative
// weighted reward. Rewards of rejected continuations still close their
// parent's label window.
CounterfactualDataset generate_counterfactuals(const Scene& scene, const PolicyFn& base,
                                               const CounterfactualConfig& cfg,
                                               const SimParams& sim, const RewardConfig& reward,
                                               const LqrConfig& lqr,
                                               const ScriptedPolicyConfig& expert);

// Scene-parallel driver with a deterministic scene-ordered merge.
CounterfactualDataset generate_dataset(const std::vector<Scene>& scenes, const BasePolicy& base,
                                       const CounterfactualConfig& cfg, const SimParams& sim,
                                       const RewardConfig& reward, const LqrConfig& lqr,
                                       const ScriptedPolicyConfig& expert, int workers);

enum class FilterReason { keep, too_far, low_reward };

FilterReason filter_record(const TransitionRecord& record, const CounterfactualConfig& cfg);

struct DatasetSplit {
  std::vector<const TransitionRecord*> adapter_split;  // collision-free label windows
  std::vector<const TransitionRecord*> q_split;        // everything
};

DatasetSplit split_dataset(const CounterfactualDataset& ds);

// Adapter regression targets: per (scene, t) the record with the
// highest weighted q-label among the adapter split; ties broken by
// lowest mode index, then input order.
std::vector<const TransitionRecord*> adapter_training_pairs(const CounterfactualDataset& ds,
                                                            const QWeights& weights);

}  // namespace mpa
