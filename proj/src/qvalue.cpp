#include "mpa/qvalue.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mpa/parallel.hpp"

namespace mpa {

QValueModel train_q_heads(const std::vector<const TransitionRecord*>& q_split,
                          const QTrainConfig& cfg, const SimParams& sim,
                          const RewardConfig& reward, const QWeights& weights,
                          std::array<TrainLog, 4>* logs) {
  if (q_split.empty()) throw std::invalid_argument("train_q_heads: empty split");

  QValueModel model;
  model.weights = weights;
  model.label_horizon = reward.label_horizon;
  model.t_fut = sim.t_fut;

  const int n = static_cast<int>(q_split.size());
  for (int p = 0; p < 4; ++p) {
    double mean = 0.0;
    for (const TransitionRecord* r : q_split) mean += r->q_labels.get(p);
    mean /= n;
    double var = 0.0;
    for (const TransitionRecord* r : q_split) {
      const double d = r->q_labels.get(p) - mean;
      var += d * d;
    }
    model.label_mean[p] = mean;
    model.label_std[p] = std::max(std::sqrt(var / n), 1e-3);
  }

  Rng rng(derive_seed(cfg.seed, 0x9a1e));
  const int in_dim = observation_feature_dim(sim) + history_feature_dim(sim.t_hist);
  std::vector<int> enc_dims = {in_dim};
  enc_dims.insert(enc_dims.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
  std::vector<Activation> enc_acts(enc_dims.size() - 1, Activation::relu);
  model.encoder = make_net(enc_dims, enc_acts, rng);

  const int head_in = enc_dims.back() + 2 * sim.t_fut;
  for (int p = 0; p < 4; ++p) {
    std::vector<int> dims = {head_in};
    dims.insert(dims.end(), cfg.head_hidden.begin(), cfg.head_hidden.end());
    dims.push_back(1);
    std::vector<Activation> acts(dims.size() - 1, Activation::relu);
    acts.back() = Activation::identity;
    model.heads[p] = make_net(dims, acts, rng);
  }

  AdamState enc_opt = AdamState::zeros_like(model.encoder);
  std::array<AdamState, 4> head_opt;
  for (int p = 0; p < 4; ++p) head_opt[p] = AdamState::zeros_like(model.heads[p]);
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

  const int batch_size = std::min(cfg.batch_size, n);
  std::vector<int> batch(batch_size);
  const int shards = std::max(1, cfg.workers);

  for (int step = 0; step < cfg.steps; ++step) {
    const bool train_encoder = step < cfg.encoder_warmup_steps;
    for (int i = 0; i < batch_size; ++i) batch[i] = rng.uniform_int(n);

    std::vector<NetGrads> enc_shard(shards);
    std::vector<std::array<NetGrads, 4>> head_shard(shards);
    std::vector<std::array<double, 4>> loss_shard(shards);
    for (int s = 0; s < shards; ++s) {
      enc_shard[s] = NetGrads::zeros_like(model.encoder);
      for (int p = 0; p < 4; ++p) head_shard[s][p] = NetGrads::zeros_like(model.heads[p]);
      loss_shard[s] = {0, 0, 0, 0};
    }

    parallel_shards(batch_size, shards, [&](int shard, int begin, int end) {
      for (int i = begin; i < end; ++i) {
        const TransitionRecord& rec = *q_split[batch[i]];
        ForwardCache ec;
        const Eigen::VectorXd z =
            forward(model.encoder, policy_input(rec.observation, rec.ego_history), &ec);
        const Eigen::VectorXd act = flatten_waypoints(rec.applied_action);
        Eigen::VectorXd head_in_vec(z.size() + act.size());
        head_in_vec << z, act;

        Eigen::VectorXd dz_total = Eigen::VectorXd::Zero(z.size());
        for (int p = 0; p < 4; ++p) {
          ForwardCache hc;
          const double pred = forward(model.heads[p], head_in_vec, &hc)(0);
          const double target = (rec.q_labels.get(p) - model.label_mean[p]) / model.label_std[p];
          const double err = pred - target;
          loss_shard[shard][p] += err * err;
          Eigen::VectorXd dLdy(1);
          dLdy(0) = 2.0 * err / batch_size;
          const Eigen::VectorXd din = backward(model.heads[p], hc, dLdy, head_shard[shard][p]);
          if (train_encoder) dz_total += din.head(z.size());
        }
        if (train_encoder) backward(model.encoder, ec, dz_total, enc_shard[shard]);
      }
    });

    for (int s = 1; s < shards; ++s) {
      enc_shard[0].accumulate(enc_shard[s]);
      for (int p = 0; p < 4; ++p) {
        head_shard[0][p].accumulate(head_shard[s][p]);
        loss_shard[0][p] += loss_shard[s][p];
      }
    }
    if (train_encoder) adam_step(model.encoder, enc_shard[0], enc_opt, adam);
    for (int p = 0; p < 4; ++p) {
      adam_step(model.heads[p], head_shard[0][p], head_opt[p], adam);
      if (logs != nullptr) (*logs)[p].losses.push_back(loss_shard[0][p] / batch_size);
    }
  }

  model.trained = true;
  return model;
}

namespace {

QBreakdown evaluate(const QValueModel& model, const Eigen::VectorXd& z,
                    const TrajectoryAction& action) {
  const Eigen::VectorXd act = flatten_waypoints(action);
  Eigen::VectorXd head_in(z.size() + act.size());
  head_in << z, act;
  QBreakdown out;
  const double w[4] = {model.weights.route, model.weights.dist, model.weights.collision,
                       model.weights.speed};
  for (int p = 0; p < 4; ++p) {
    const double pred = forward(model.heads[p], head_in)(0);
    out.q[p] = pred * model.label_std[p] + model.label_mean[p];
    out.combined += w[p] * out.q[p];
  }
  return out;
}

}  // namespace

QBreakdown combined_q(const QValueModel& model, const Observation& obs, const EgoHistory& hist,
                      const TrajectoryAction& action) {
  if (!model.trained) throw std::logic_error("combined_q: model not trained");
  const Eigen::VectorXd z = forward(model.encoder, policy_input(obs, hist));
  return evaluate(model, z, action);
}

SelectionResult select_best(const QValueModel& model, const Observation& obs,
                            const EgoHistory& hist, const TrajectoryAction& a_base,
                            std::span<const ResidualAction> candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_best: no candidates");
  if (!model.trained) throw std::logic_error("select_best: model not trained");

  const Eigen::VectorXd z = forward(model.encoder, policy_input(obs, hist));
  SelectionResult res;
  res.table.reserve(candidates.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const QBreakdown q = evaluate(model, z, apply_residual(a_base, candidates[i]));
    if (q.combined > best) {
      best = q.combined;
      res.index = static_cast<int>(i);
    }
    res.table.push_back(q);
  }
  res.chosen = candidates[res.index];
  return res;
}

}  // namespace mpa
