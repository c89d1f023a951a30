#pragma once

#include <cstdint>
#include <vector>

#include "mpa/features.hpp"
#include "mpa/lqr.hpp"
#include "mpa/nn.hpp"
#include "mpa/world.hpp"

namespace mpa {

struct ScriptedPolicyConfig {
  double lookahead = 8.0;       // lateral-offset merge distance, m
  double cruise_speed = 8.0;    // m/s
  double a_lat_comfort = 3.0;   // curvature speed limit, m/s^2
  double decel_comfort = 2.0;   // end-of-route taper, m/s^2
  double accel_comfort = 1.5;   // per-waypoint speed-up bound, m/s^2
  double min_speed = 1.0;       // taper floor so the route end is crossed
};

// Route follower used to produce reference logs: waypoints along the
// route at curvature- and end-tapered speeds, with any current lateral
// offset decayed to zero over the lookahead distance.
TrajectoryAction pure_pursuit_plan(const WorldState& state, const Scene& scene,
                                   const ScriptedPolicyConfig& cfg, int t_fut,
                                   double dt_waypoint);

struct BcConfig {
  std::vector<int> encoder_hidden = {256, 128};
  std::vector<int> head_hidden = {64};
  double lr = 1e-3;
  int batch_size = 64;
  int steps = 4000;
  std::uint64_t seed = 7;
  int t_fut = 6;
  double dt_waypoint = 0.5;
  int workers = 2;
};

struct BasePolicy {
  enum class Kind { scripted, cloned };
  Kind kind = Kind::scripted;
  ScriptedPolicyConfig scripted;
  DenseNet encoder;  // policy_input -> z
  DenseNet head;     // z -> 2 * t_fut waypoint coordinates
  int t_fut = 6;
  double dt_waypoint = 0.5;
  bool trained = false;
};

struct BcSample {
  Eigen::VectorXd input;   // policy_input(obs, hist)
  Eigen::VectorXd target;  // flattened expert waypoints
};

struct BcDataset {
  std::vector<BcSample> samples;
  int t_fut = 6;
  double dt_waypoint = 0.5;
};

struct TrainLog {
  std::vector<double> losses;
};

// Minimizes mean squared waypoint error with Adam; parameters are
// frozen afterwards. Throws on an empty dataset.
BasePolicy train_bc(const BcDataset& dataset, const BcConfig& cfg, TrainLog* log = nullptr);

// Deterministic plan. Scripted policies delegate to pure_pursuit_plan
// (and need state + scene); cloned policies use only (obs, hist).
TrajectoryAction predict_base(const BasePolicy& policy, const Observation& obs,
                              const EgoHistory& hist, const WorldState* state,
                              const Scene* scene);

struct ExpertFrame {
  WorldState state;
  Observation obs;
  EgoHistory hist;
  TrajectoryAction action;
};

struct ExpertLog {
  std::vector<ExpertFrame> frames;  // frame i: state at step i and the plan taken there
  std::vector<WorldState> states;   // frames.size() + 1 states including the final one
  TerminationKind termination = TerminationKind::running;
};

// Closed-loop rollout of the scripted expert; the reference log used
// for cloning, counterfactual restarts and the L2 study.
ExpertLog rollout_scripted(const Scene& scene, const SimParams& sim, const LqrConfig& lqr,
                           const ScriptedPolicyConfig& expert);

// Convenience: expert logs to supervised cloning pairs.
void append_bc_samples(const ExpertLog& log, BcDataset& dataset);

}  // namespace mpa
