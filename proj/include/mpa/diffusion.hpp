#pragma once

#include <cstdint>
#include <vector>

#include "mpa/counterfactual.hpp"
#include "mpa/nn.hpp"

namespace mpa {

// Cumulative schedule: alpha_bar[k] for k in [0, K], alpha_bar[0] = 1,
// strictly decreasing, clamped above 1e-4.
struct DiffusionSchedule {
  int K = 0;
  std::vector<double> alpha_bar;
};

enum class ScheduleKind { linear, cosine };

DiffusionSchedule build_schedule(int K, ScheduleKind kind);

// x_k = sqrt(abar_k) * x0 + sqrt(1 - abar_k) * eps, elementwise.
ResidualAction forward_diffuse(const ResidualAction& r0, int k, const DiffusionSchedule& schedule,
                               const ResidualAction& noise);

// Residual denoiser (x0 prediction) with N winner-take-all modes.
// Residuals are trained and sampled in a normalized space; the
// per-coordinate statistics live in the model.
struct DenoiserModel {
  DenseNet encoder;   // policy_input(obs, hist) -> z
  DenseNet denoiser;  // [x_k, k-embedding, z, hist feats, a_base] -> N * 2 * t_fut
  int n_modes = 6;
  int t_fut = 6;
  double dt_waypoint = 0.5;
  DiffusionSchedule schedule;
  Eigen::VectorXd norm_mean;  // 2 * t_fut
  Eigen::VectorXd norm_std;
  bool trained = false;
};

struct AdapterTrainConfig {
  std::vector<int> encoder_hidden = {256, 128};
  std::vector<int> denoiser_hidden = {256, 256};
  int n_modes = 6;
  int diffusion_steps = 50;
  ScheduleKind schedule = ScheduleKind::cosine;
  double lr = 1e-3;
  int batch_size = 64;
  int steps = 3000;
  std::uint64_t seed = 11;
  int workers = 2;
};

// Untrained model with normalization statistics fitted to the targets.
DenoiserModel make_denoiser(const std::vector<const TransitionRecord*>& pairs,
                            const AdapterTrainConfig& cfg, const SimParams& sim);

// Winner-take-all diffusion loss over one batch: per sample draw
// k ~ U[1,K] and eps, diffuse the normalized target, run the denoiser
// and keep the squared error of the closest mode; gradients flow only
// through the winning mode. Returns the mean loss.
double adapter_loss(DenoiserModel& model, const std::vector<const TransitionRecord*>& batch,
                    Rng& rng, NetGrads& enc_grads, NetGrads& den_grads, int workers);

DenoiserModel train_adapter(const std::vector<const TransitionRecord*>& pairs,
                            const AdapterTrainConfig& cfg, const SimParams& sim,
                            TrainLog* log = nullptr);

// Deterministic DDIM (eta = 0) over an evenly strided sub-schedule;
// each chain commits one mode drawn uniformly at the start.
std::vector<ResidualAction> ddim_sample(const DenoiserModel& model, const Observation& obs,
                                        const EgoHistory& hist, const TrajectoryAction& a_base,
                                        int inference_steps, int n_samples, Rng& rng);

}  // namespace mpa
