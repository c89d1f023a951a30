#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mpa/diffusion.hpp"
#include "mpa/policy.hpp"
#include "mpa/qvalue.hpp"

namespace mpa {

// Per-frame scores; values restricted to {0,1} (nc, ttc, com) and
// {0, 0.5, 1} (dac).
struct FrameScores {
  double nc = 1.0;
  double dac = 1.0;
  double ttc = 1.0;
  double com = 1.0;
};

struct EpisodeMetrics {
  double rc = 0.0;
  double nc = 0.0;
  double dac = 0.0;
  double ttc = 0.0;
  double com = 0.0;
  double hdscore = 0.0;
  TerminationKind termination = TerminationKind::running;
  int frames = 0;
};

struct MetricsConfig {
  double weight_ttc = 5.0;
  double weight_com = 2.0;
  double ttc_window = 0.5;  // s
  // Comfort thresholds.
  double a_lon_min = -4.05;
  double a_lon_max = 2.40;
  double a_lat_max = 4.89;
  double yaw_rate_max = 0.95;
  double yaw_accel_max = 1.93;
  double jerk_max = 8.37;
};

double dac_score_from_ratio(double inside_ratio);

// history: up to the last three states before curr (oldest first);
// comfort falls back to the differences available near episode start.
FrameScores frame_scores(std::span<const WorldState> history, const WorldState& curr,
                         const MetricsConfig& cfg, const SimParams& sim);

// HDScore = RC * mean_t of nc*dac*(w_ttc*ttc + w_com*com)/(w_ttc+w_com);
// component metrics are frame averages x 100.
EpisodeMetrics episode_metrics(std::span<const FrameScores> frames, double rc_fraction,
                               const MetricsConfig& cfg);

struct PolicyStack {
  const BasePolicy* base = nullptr;
  const DenoiserModel* adapter = nullptr;  // null: base policy alone
  const QValueModel* q = nullptr;
  int samples = 20;       // DDIM candidates per step (S)
  int ddim_steps = 10;
};

struct TraceFrame {
  int t = 0;
  Pose2D ego;
  double v = 0.0;
  TrajectoryAction action;  // the plan executed this step
  int chosen_candidate = -1;
  std::vector<double> q_table;
  FrameScores scores;
};

struct EpisodeTrace {
  std::string scene_id;
  std::vector<TraceFrame> frames;
  EpisodeMetrics metrics;
};

struct EvalConfig {
  SimParams sim;
  LqrConfig lqr;
  RewardConfig reward;
  MetricsConfig metrics;
  int workers = 2;
};

struct EvalResult {
  std::vector<EpisodeTrace> episodes;  // scene order
  EpisodeMetrics mean;
};

// Closed-loop evaluation: per step render, query the base policy,
// optionally sample S residuals and pick by combined Q, track with the
// LQR for one step, score the frame, stop on termination.
EvalResult run_closed_loop(const PolicyStack& stack, const std::vector<Scene>& scenes,
                           const EvalConfig& cfg, std::uint64_t seed);

struct L2Row {
  double horizon_s = 0.0;
  double open_l2 = 0.0;
  double closed_l2 = 0.0;
};

// Open-loop: the policy is queried on expert-visited states and its
// plan compared to the expert's future positions. Closed-loop: the
// policy is rolled out from the same states for the horizon and its
// executed positions compared at matched times. Averaged over restart
// points every `stride` steps and over scenes.
std::vector<L2Row> open_vs_closed_l2(const BasePolicy& policy, const std::vector<Scene>& scenes,
                                     std::span<const double> horizons_s, const EvalConfig& cfg,
                                     int stride = 8);

}  // namespace mpa
