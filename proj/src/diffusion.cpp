#include "mpa/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mpa/parallel.hpp"

namespace mpa {

DiffusionSchedule build_schedule(int K, ScheduleKind kind) {
  if (K < 1) throw std::invalid_argument("diffusion steps must be >= 1");
  DiffusionSchedule s;
  s.K = K;
  s.alpha_bar.resize(K + 1);
  s.alpha_bar[0] = 1.0;
  if (kind == ScheduleKind::cosine) {
    const double off = 0.008;
    const double denom = std::cos(off / (1.0 + off) * M_PI / 2.0);
    for (int k = 1; k <= K; ++k) {
      const double u = (static_cast<double>(k) / K + off) / (1.0 + off);
      const double v = std::cos(u * M_PI / 2.0) / denom;
      s.alpha_bar[k] = std::clamp(v * v, 1e-4, 1.0);
    }
  } else {
    const double beta_lo = 1e-4;
    const double beta_hi = 2e-2;
    double prod = 1.0;
    for (int k = 1; k <= K; ++k) {
      const double beta = K == 1 ? beta_lo : beta_lo + (beta_hi - beta_lo) * (k - 1) / (K - 1);
      prod *= 1.0 - beta;
      s.alpha_bar[k] = std::clamp(prod, 1e-4, 1.0);
    }
  }
  return s;
}

ResidualAction forward_diffuse(const ResidualAction& r0, int k, const DiffusionSchedule& schedule,
                               const ResidualAction& noise) {
  if (k < 0 || k > schedule.K) throw std::out_of_range("diffusion step out of range");
  if (noise.deltas.size() != r0.deltas.size())
    throw std::invalid_argument("noise shape mismatch");
  const double a = std::sqrt(schedule.alpha_bar[k]);
  const double b = std::sqrt(1.0 - schedule.alpha_bar[k]);
  ResidualAction out = r0;
  for (std::size_t i = 0; i < out.deltas.size(); ++i)
    out.deltas[i] = r0.deltas[i] * a + noise.deltas[i] * b;
  return out;
}

namespace {

// [x_k, sqrt(abar_k), sqrt(1-abar_k), z, hist, a_base]
Eigen::VectorXd denoiser_input(const DenoiserModel& model, const Eigen::VectorXd& x_k, int k,
                               const Eigen::VectorXd& z, const Eigen::VectorXd& hist_feat,
                               const Eigen::VectorXd& base_flat) {
  Eigen::VectorXd in(x_k.size() + 2 + z.size() + hist_feat.size() + base_flat.size());
  in << x_k, std::sqrt(model.schedule.alpha_bar[k]),
      std::sqrt(1.0 - model.schedule.alpha_bar[k]), z, hist_feat, base_flat;
  return in;
}

Eigen::VectorXd normalize(const DenoiserModel& model, const Eigen::VectorXd& r) {
  return ((r - model.norm_mean).array() / model.norm_std.array()).matrix();
}

Eigen::VectorXd denormalize(const DenoiserModel& model, const Eigen::VectorXd& r) {
  return (r.array() * model.norm_std.array()).matrix() + model.norm_mean;
}

}  // namespace

DenoiserModel make_denoiser(const std::vector<const TransitionRecord*>& pairs,
                            const AdapterTrainConfig& cfg, const SimParams& sim) {
  if (pairs.empty()) throw std::invalid_argument("make_denoiser: no training pairs");
  DenoiserModel model;
  model.n_modes = cfg.n_modes;
  model.t_fut = sim.t_fut;
  model.dt_waypoint = sim.dt_waypoint;
  model.schedule = build_schedule(cfg.diffusion_steps, cfg.schedule);

  const int rdim = 2 * sim.t_fut;
  model.norm_mean = Eigen::VectorXd::Zero(rdim);
  model.norm_std = Eigen::VectorXd::Zero(rdim);
  for (const TransitionRecord* r : pairs) model.norm_mean += flatten_residual(r->residual);
  model.norm_mean /= static_cast<double>(pairs.size());
  for (const TransitionRecord* r : pairs) {
    const Eigen::VectorXd d = flatten_residual(r->residual) - model.norm_mean;
    model.norm_std += d.cwiseProduct(d);
  }
  model.norm_std = (model.norm_std / static_cast<double>(pairs.size())).cwiseSqrt();
  model.norm_std = model.norm_std.cwiseMax(1e-3);

  Rng rng(derive_seed(cfg.seed, 0xada4));
  const int in_dim = observation_feature_dim(sim) + history_feature_dim(sim.t_hist);
  std::vector<int> enc_dims = {in_dim};
  enc_dims.insert(enc_dims.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
  std::vector<Activation> enc_acts(enc_dims.size() - 1, Activation::relu);
  model.encoder = make_net(enc_dims, enc_acts, rng);

  const int den_in = rdim + 2 + enc_dims.back() + history_feature_dim(sim.t_hist) + rdim;
  std::vector<int> den_dims = {den_in};
  den_dims.insert(den_dims.end(), cfg.denoiser_hidden.begin(), cfg.denoiser_hidden.end());
  den_dims.push_back(cfg.n_modes * rdim);
  std::vector<Activation> den_acts(den_dims.size() - 1, Activation::relu);
  den_acts.back() = Activation::identity;
  model.denoiser = make_net(den_dims, den_acts, rng);
  return model;
}

double adapter_loss(DenoiserModel& model, const std::vector<const TransitionRecord*>& batch,
                    Rng& rng, NetGrads& enc_grads, NetGrads& den_grads, int workers) {
  if (batch.empty()) throw std::invalid_argument("adapter_loss: empty batch");
  const int rdim = 2 * model.t_fut;
  const int n = static_cast<int>(batch.size());

  // Pre-draw per-sample randomness so sharded execution stays
  // deterministic.
  std::vector<int> ks(n);
  std::vector<Eigen::VectorXd> eps(n);
  for (int i = 0; i < n; ++i) {
    ks[i] = 1 + rng.uniform_int(model.schedule.K);
    eps[i].resize(rdim);
    for (int d = 0; d < rdim; ++d) eps[i](d) = rng.normal();
  }

  const int shards = std::max(1, workers);
  std::vector<NetGrads> enc_shard(shards), den_shard(shards);
  std::vector<double> loss_shard(shards, 0.0);
  for (int s = 0; s < shards; ++s) {
    enc_shard[s] = NetGrads::zeros_like(model.encoder);
    den_shard[s] = NetGrads::zeros_like(model.denoiser);
  }

  parallel_shards(n, shards, [&](int shard, int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const TransitionRecord& rec = *batch[i];
      const Eigen::VectorXd target = normalize(model, flatten_residual(rec.residual));
      const double a = std::sqrt(model.schedule.alpha_bar[ks[i]]);
      const double b = std::sqrt(1.0 - model.schedule.alpha_bar[ks[i]]);
      const Eigen::VectorXd x_k = a * target + b * eps[i];

      ForwardCache ec, dc;
      const Eigen::VectorXd z =
          forward(model.encoder, policy_input(rec.observation, rec.ego_history), &ec);
      const Eigen::VectorXd hist_feat = history_features(rec.ego_history);
      const Eigen::VectorXd base_flat = flatten_waypoints(rec.base_action);
      const Eigen::VectorXd out =
          forward(model.denoiser, denoiser_input(model, x_k, ks[i], z, hist_feat, base_flat), &dc);

      int winner = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int m = 0; m < model.n_modes; ++m) {
        const double err = (out.segment(m * rdim, rdim) - target).squaredNorm();
        if (err < best) {
          best = err;
          winner = m;
        }
      }
      loss_shard[shard] += best;

      Eigen::VectorXd dout = Eigen::VectorXd::Zero(out.size());
      dout.segment(winner * rdim, rdim) =
          2.0 * (out.segment(winner * rdim, rdim) - target) / n;
      const Eigen::VectorXd din = backward(model.denoiser, dc, dout, den_shard[shard]);
      // Slice of the denoiser input gradient that flows into z.
      const Eigen::VectorXd dz = din.segment(rdim + 2, z.size());
      backward(model.encoder, ec, dz, enc_shard[shard]);
    }
  });

  double loss = 0.0;
  for (int s = 0; s < shards; ++s) {
    loss += loss_shard[s];
    enc_grads.accumulate(enc_shard[s]);
    den_grads.accumulate(den_shard[s]);
  }
  return loss / n;
}

DenoiserModel train_adapter(const std::vector<const TransitionRecord*>& pairs,
                            const AdapterTrainConfig& cfg, const SimParams& sim, TrainLog* log) {
  DenoiserModel model = make_denoiser(pairs, cfg, sim);
  AdamState enc_opt = AdamState::zeros_like(model.encoder);
  AdamState den_opt = AdamState::zeros_like(model.denoiser);
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

  Rng rng(derive_seed(cfg.seed, 0xd1ff));
  const int n = static_cast<int>(pairs.size());
  const int batch_size = std::min(cfg.batch_size, n);
  std::vector<const TransitionRecord*> batch(batch_size);

  for (int step = 0; step < cfg.steps; ++step) {
    for (int i = 0; i < batch_size; ++i) batch[i] = pairs[rng.uniform_int(n)];
    NetGrads enc_grads = NetGrads::zeros_like(model.encoder);
    NetGrads den_grads = NetGrads::zeros_like(model.denoiser);
    const double loss = adapter_loss(model, batch, rng, enc_grads, den_grads, cfg.workers);
    adam_step(model.encoder, enc_grads, enc_opt, adam);
    adam_step(model.denoiser, den_grads, den_opt, adam);
    if (log != nullptr) log->losses.push_back(loss);
  }
  model.trained = true;
  return model;
}

std::vector<ResidualAction> ddim_sample(const DenoiserModel& model, const Observation& obs,
                                        const EgoHistory& hist, const TrajectoryAction& a_base,
                                        int inference_steps, int n_samples, Rng& rng) {
  if (!model.trained) throw std::logic_error("ddim_sample: model not trained");
  if (inference_steps < 1 || inference_steps > model.schedule.K)
    throw std::invalid_argument("inference_steps out of range");

  std::vector<ResidualAction> out;
  if (n_samples <= 0) return out;

  const int rdim = 2 * model.t_fut;
  const Eigen::VectorXd z = forward(model.encoder, policy_input(obs, hist));
  const Eigen::VectorXd hist_feat = history_features(hist);
  const Eigen::VectorXd base_flat = flatten_waypoints(a_base);

  // Evenly strided sub-schedule K = k_0 > k_1 > ... > k_S = 0.
  std::vector<int> ks(inference_steps + 1);
  for (int j = 0; j <= inference_steps; ++j)
    ks[j] = static_cast<int>(std::lround(
        static_cast<double>(model.schedule.K) * (inference_steps - j) / inference_steps));

  out.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    const int mode = rng.uniform_int(model.n_modes);
    Eigen::VectorXd x(rdim);
    for (int d = 0; d < rdim; ++d) x(d) = rng.normal();

    for (int j = 0; j < inference_steps; ++j) {
      const int k = ks[j];
      const int k_next = ks[j + 1];
      const Eigen::VectorXd pred =
          forward(model.denoiser, denoiser_input(model, x, k, z, hist_feat, base_flat));
      const Eigen::VectorXd x0 = pred.segment(mode * rdim, rdim);
      if (k_next == 0) {
        x = x0;
      } else {
        const double a_k = std::sqrt(model.schedule.alpha_bar[k]);
        const double b_k = std::sqrt(1.0 - model.schedule.alpha_bar[k]);
        const Eigen::VectorXd eps_hat = (x - a_k * x0) / b_k;
        const double a_n = std::sqrt(model.schedule.alpha_bar[k_next]);
        const double b_n = std::sqrt(1.0 - model.schedule.alpha_bar[k_next]);
        x = a_n * x0 + b_n * eps_hat;
      }
    }
    out.push_back(unflatten_residual(denormalize(model, x)));
  }
  return out;
}

}  // namespace mpa
