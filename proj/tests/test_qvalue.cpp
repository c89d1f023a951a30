#include <doctest.h>

#include <cmath>

#include "mpa/qvalue.hpp"

using namespace mpa;

namespace {

constexpr int kGrid = 4;
constexpr int kRoutePts = 2;
constexpr int kTHist = 2;
constexpr int kTFut = 2;

SimParams tiny_sim() {
  SimParams s;
  s.grid_size = kGrid;
  s.route_feat_points = kRoutePts;
  s.t_hist = kTHist;
  s.t_fut = kTFut;
  return s;
}

// Heads with constant outputs (bias-only single layers).
QValueModel crafted_q(const std::array<double, 4>& outputs, const QWeights& w) {
  QValueModel model;
  model.weights = w;
  model.t_fut = kTFut;
  model.label_mean = {0, 0, 0, 0};
  model.label_std = {1, 1, 1, 1};
  const SimParams sim = tiny_sim();
  const int enc_in = observation_feature_dim(sim) + history_feature_dim(sim.t_hist);
  Layer enc;
  enc.W = Eigen::MatrixXd::Zero(3, enc_in);
  enc.b = Eigen::VectorXd::Zero(3);
  enc.act = Activation::identity;
  model.encoder.layers.push_back(enc);
  for (int p = 0; p < 4; ++p) {
    Layer head;
    head.W = Eigen::MatrixXd::Zero(1, 3 + 2 * kTFut);
    head.b = Eigen::VectorXd::Constant(1, outputs[p]);
    head.act = Activation::identity;
    model.heads[p].layers.push_back(head);
  }
  model.trained = true;
  return model;
}

Observation tiny_obs() {
  Observation obs;
  obs.grid_size = kGrid;
  obs.cell_size = 1.0;
  obs.bev.assign(kGrid * kGrid, 0);
  obs.route_feat = {{1, 0}, {2, 0}};
  return obs;
}

EgoHistory tiny_hist() {
  EgoHistory h;
  h.frames.assign(kTHist, EgoHistoryFrame{});
  return h;
}

TrajectoryAction tiny_action(double x = 1.0) {
  TrajectoryAction a;
  a.dt_waypoint = 0.5;
  a.waypoints = {{x, 0.0}, {2 * x, 0.0}};
  return a;
}

}  // namespace

TEST_CASE("combined_q weighted sums") {
  SUBCASE("hand-set heads and weights") {
    const QValueModel model = crafted_q({1.0, -2.0, -1.0, 0.0}, {1.0, 0.2, 5.0, 0.1});
    const QBreakdown q = combined_q(model, tiny_obs(), tiny_hist(), tiny_action());
    CHECK(q.combined == doctest::Approx(-4.4));
    CHECK(q.q[0] == doctest::Approx(1.0));
    CHECK(q.q[2] == doctest::Approx(-1.0));
  }

  SUBCASE("all-zero weights give zero") {
    const QValueModel model = crafted_q({3.0, 5.0, -7.0, 2.0}, {0, 0, 0, 0});
    CHECK(combined_q(model, tiny_obs(), tiny_hist(), tiny_action()).combined ==
          doctest::Approx(0.0));
  }

  SUBCASE("single nonzero weight selects that head") {
    const QValueModel model = crafted_q({3.5, 5.0, -7.0, 2.0}, {1, 0, 0, 0});
    CHECK(combined_q(model, tiny_obs(), tiny_hist(), tiny_action()).combined ==
          doctest::Approx(3.5));
  }
}

namespace {

// Heads that read the first action coordinate so candidates differ.
QValueModel action_sensitive_q(const QWeights& w) {
  QValueModel model = crafted_q({0, 0, 0, 0}, w);
  for (int p = 0; p < 4; ++p) {
    model.heads[p].layers[0].W(0, 3) = (p == 0) ? 1.0 : 0.1;  // x of waypoint 0
  }
  return model;
}

}  // namespace

TEST_CASE("select_best argmax with documented tie-break") {
  const QValueModel model = action_sensitive_q({1, 0, 0, 0});
  const TrajectoryAction base = tiny_action(1.0);
  std::vector<ResidualAction> candidates = {
      ResidualAction{{{0.0, 0}, {0, 0}}},
      ResidualAction{{{2.0, 0}, {0, 0}}},  // largest x -> highest q
      ResidualAction{{{1.0, 0}, {0, 0}}},
  };
  const SelectionResult sel =
      select_best(model, tiny_obs(), tiny_hist(), base, candidates);
  CHECK(sel.index == 1);
  REQUIRE(sel.table.size() == 3);
  CHECK(sel.table[1].combined > sel.table[0].combined);

  SUBCASE("single candidate returns it") {
    std::vector<ResidualAction> one = {candidates[0]};
    CHECK(select_best(model, tiny_obs(), tiny_hist(), base, one).index == 0);
  }

  SUBCASE("exact tie keeps the lowest index") {
    std::vector<ResidualAction> tie = {candidates[0], candidates[0]};
    CHECK(select_best(model, tiny_obs(), tiny_hist(), base, tie).index == 0);
  }

  SUBCASE("empty candidate set throws") {
    CHECK_THROWS(select_best(model, tiny_obs(), tiny_hist(), base, {}));
  }
}

TEST_CASE("argmax is invariant to positive weight scaling") {
  const TrajectoryAction base = tiny_action(1.0);
  std::vector<ResidualAction> candidates;
  for (int i = 0; i < 5; ++i)
    candidates.push_back(ResidualAction{{{0.3 * i, 0.1 * i}, {0.2 * i, 0}}});
  const QWeights w{1.0, 0.2, 5.0, 0.1};
  const QValueModel a = action_sensitive_q(w);
  QValueModel b = a;
  b.weights = {w.route * 7.5, w.dist * 7.5, w.collision * 7.5, w.speed * 7.5};
  const int ia = select_best(a, tiny_obs(), tiny_hist(), base, candidates).index;
  const int ib = select_best(b, tiny_obs(), tiny_hist(), base, candidates).index;
  CHECK(ia == ib);
}

TEST_CASE("zero-weight heads cannot influence selection") {
  const TrajectoryAction base = tiny_action(1.0);
  std::vector<ResidualAction> candidates = {
      ResidualAction{{{0.5, 0}, {0, 0}}},
      ResidualAction{{{1.5, 0}, {0, 0}}},
  };
  QValueModel model = action_sensitive_q({1, 0.2, 0, 0.1});
  const int before = select_best(model, tiny_obs(), tiny_hist(), base, candidates).index;
  // Arbitrarily perturb the collision head.
  model.heads[2].layers[0].W.setConstant(123.0);
  model.heads[2].layers[0].b.setConstant(-999.0);
  const int after = select_best(model, tiny_obs(), tiny_hist(), base, candidates).index;
  CHECK(before == after);
}

namespace {

// Synthetic records over the tiny sim whose labels are a visible linear
// function of the observation and action.
std::vector<TransitionRecord> synthetic_records(int n, std::uint64_t seed) {
  std::vector<TransitionRecord> recs;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    TransitionRecord r;
    r.scene_id = "syn";
    r.t = i;
    r.observation = tiny_obs();
    r.observation.ego_v = rng.uniform(0.0, 10.0);
    r.ego_history = tiny_hist();
    r.ego_history.frames.back().v = r.observation.ego_v;
    const double x = rng.uniform(-2.0, 2.0);
    r.applied_action = tiny_action(x);
    r.base_action = tiny_action(1.0);
    r.residual.deltas = {{x - 1.0, 0}, {2 * (x - 1.0), 0}};
    r.mode = 0;
    r.q_labels.q_route = 2.0 * x;                            // action-driven
    r.q_labels.q_dist = -std::abs(x);                        // action-driven
    r.q_labels.q_collision = 0.0;                            // constant
    r.q_labels.q_speed = -0.1 * r.observation.ego_v;         // observation-driven
    r.reward_window.resize(1);
    recs.push_back(std::move(r));
  }
  return recs;
}

}  // namespace

TEST_CASE("train_q_heads regresses visible structure") {
  const SimParams sim = tiny_sim();
  const RewardConfig reward;
  const std::vector<TransitionRecord> recs = synthetic_records(256, 4);
  std::vector<const TransitionRecord*> split;
  for (const TransitionRecord& r : recs) split.push_back(&r);

  QTrainConfig cfg;
  cfg.encoder_hidden = {32, 16};
  cfg.head_hidden = {16};
  cfg.steps = 1200;
  cfg.encoder_warmup_steps = 400;
  cfg.batch_size = 32;
  cfg.lr = 2e-3;
  cfg.workers = 2;
  const QValueModel model = train_q_heads(split, cfg, sim, reward, QWeights{});

  SUBCASE("constant collision targets regress to zero") {
    const std::vector<TransitionRecord> held = synthetic_records(32, 99);
    for (const TransitionRecord& r : held) {
      const QBreakdown q = combined_q(model, r.observation, r.ego_history, r.applied_action);
      CHECK(std::abs(q.q[2]) < 0.05);
    }
  }

  SUBCASE("route head tracks the action signal on held-out data") {
    const std::vector<TransitionRecord> held = synthetic_records(64, 123);
    double mae = 0.0;
    for (const TransitionRecord& r : held) {
      const QBreakdown q = combined_q(model, r.observation, r.ego_history, r.applied_action);
      mae += std::abs(q.q[0] - r.q_labels.q_route);
    }
    mae /= held.size();
    CHECK(mae < 0.8);  // label range is 8
  }

  SUBCASE("duplicating records leaves converged predictions close") {
    std::vector<const TransitionRecord*> doubled = split;
    doubled.insert(doubled.end(), split.begin(), split.end());
    const QValueModel model2 = train_q_heads(doubled, cfg, sim, reward, QWeights{});
    const std::vector<TransitionRecord> held = synthetic_records(32, 7);
    for (const TransitionRecord& r : held) {
      const QBreakdown a = combined_q(model, r.observation, r.ego_history, r.applied_action);
      const QBreakdown b = combined_q(model2, r.observation, r.ego_history, r.applied_action);
      CHECK(std::abs(a.q[0] - b.q[0]) < 0.8);
    }
  }

  SUBCASE("empty split throws") {
    CHECK_THROWS(train_q_heads({}, cfg, sim, reward, QWeights{}));
  }
}
