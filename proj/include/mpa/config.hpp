#pragma once

#include <cstdint>

#include "mpa/counterfactual.hpp"
#include "mpa/diffusion.hpp"
#include "mpa/lqr.hpp"
#include "mpa/metrics.hpp"
#include "mpa/policy.hpp"
#include "mpa/qvalue.hpp"

namespace mpa {

struct SplitSpec {
  int train = 64;
  int eval_nominal = 16;
  int eval_safety = 8;
};

// Everything one run needs; fully serialized next to every output so
// artifacts stay reproducible and hash-checkable.
struct RunConfig {
  std::uint64_t seed = 1;
  SplitSpec splits;
  SimParams sim;
  RewardConfig reward;
  QWeights weights;
  LqrConfig lqr;
  ScriptedPolicyConfig expert;
  CounterfactualConfig cf;
  BcConfig bc;
  AdapterTrainConfig adapter;
  QTrainConfig q;
  MetricsConfig metrics;
  int samples = 20;  // inference-time candidates (S)
  int ddim_steps = 10;
  int workers = 2;
};

}  // namespace mpa
