#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mpa/counterfactual.hpp"
#include "mpa/nn.hpp"

namespace mpa {

// Four principle heads over a shared scene encoding plus the candidate
// trajectory; each head regresses its discounted truncated return.
// Head order: route, dist, collision, speed.
struct QValueModel {
  DenseNet encoder;                 // policy_input(obs, hist) -> z
  std::array<DenseNet, 4> heads;    // [z, action] -> 1 (normalized target space)
  QWeights weights;
  int label_horizon = 5;
  int t_fut = 6;
  std::array<double, 4> label_mean{};
  std::array<double, 4> label_std{{1, 1, 1, 1}};
  bool trained = false;
};

struct QTrainConfig {
  std::vector<int> encoder_hidden = {256, 128};
  std::vector<int> head_hidden = {128, 64};
  double lr = 1e-3;
  int batch_size = 64;
  int steps = 2500;
  int encoder_warmup_steps = 800;  // encoder frozen afterwards
  std::uint64_t seed = 13;
  int workers = 2;
};

// Each head minimizes MSE against its principle's label; the candidate
// fed in is the record's applied action. The shared encoder trains
// during the warmup phase only, so heads stay independent afterwards.
QValueModel train_q_heads(const std::vector<const TransitionRecord*>& q_split,
                          const QTrainConfig& cfg, const SimParams& sim,
                          const RewardConfig& reward, const QWeights& weights,
                          std::array<TrainLog, 4>* logs = nullptr);

struct QBreakdown {
  std::array<double, 4> q{};  // per-principle predictions, label scale
  double combined = 0.0;
};

QBreakdown combined_q(const QValueModel& model, const Observation& obs, const EgoHistory& hist,
                      const TrajectoryAction& action);

struct SelectionResult {
  ResidualAction chosen;
  int index = 0;
  std::vector<QBreakdown> table;
};

// Argmax of the combined value over a_base + candidate; ties go to the
// lowest candidate index. Throws on an empty candidate set.
SelectionResult select_best(const QValueModel& model, const Observation& obs,
                            const EgoHistory& hist, const TrajectoryAction& a_base,
                            std::span<const ResidualAction> candidates);

}  // namespace mpa
