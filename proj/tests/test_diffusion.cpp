#include <doctest.h>

#include <cmath>

#include "mpa/diffusion.hpp"

using namespace mpa;

TEST_CASE("schedules anchor at 1, decrease strictly, match the product oracle") {
  for (const ScheduleKind kind : {ScheduleKind::cosine, ScheduleKind::linear}) {
    const DiffusionSchedule s = build_schedule(50, kind);
    CHECK(s.alpha_bar[0] == doctest::Approx(1.0));
    for (int k = 1; k <= 50; ++k) CHECK(s.alpha_bar[k] < s.alpha_bar[k - 1]);
    CHECK(s.alpha_bar[50] > 0.0);
    // Signal-to-noise ratio strictly decreasing.
    for (int k = 2; k <= 50; ++k) {
      const double snr_prev = s.alpha_bar[k - 1] / (1.0 - s.alpha_bar[k - 1]);
      const double snr = s.alpha_bar[k] / (1.0 - s.alpha_bar[k]);
      CHECK(snr < snr_prev);
    }
  }

  SUBCASE("linear schedule equals an independent cumulative product") {
    const int K = 50;
    const DiffusionSchedule s = build_schedule(K, ScheduleKind::linear);
    double prod = 1.0;
    for (int k = 1; k <= K; ++k) {
      const double beta = 1e-4 + (2e-2 - 1e-4) * (k - 1) / (K - 1);
      prod *= 1.0 - beta;
      CHECK(s.alpha_bar[k] == doctest::Approx(prod).epsilon(1e-12));
    }
  }

  CHECK_THROWS(build_schedule(0, ScheduleKind::cosine));
}

TEST_CASE("forward_diffuse formula") {
  DiffusionSchedule s = build_schedule(10, ScheduleKind::cosine);
  ResidualAction r0{{{2.0, -1.0}, {0.5, 0.0}}};
  ResidualAction noise{{{1.0, 1.0}, {-1.0, 0.5}}};

  SUBCASE("k = 0 is the identity") {
    const ResidualAction out = forward_diffuse(r0, 0, s, noise);
    CHECK(out.deltas[0].x == doctest::Approx(2.0));
    CHECK(out.deltas[1].y == doctest::Approx(0.0));
  }

  SUBCASE("zero noise scales by sqrt(alpha_bar)") {
    ResidualAction zero{{{0, 0}, {0, 0}}};
    const ResidualAction out = forward_diffuse(r0, 5, s, zero);
    const double a = std::sqrt(s.alpha_bar[5]);
    CHECK(out.deltas[0].x == doctest::Approx(2.0 * a));
  }

  SUBCASE("alpha_bar 0.25 arithmetic") {
    s.alpha_bar[3] = 0.25;
    const ResidualAction out = forward_diffuse(r0, 3, s, noise);
    CHECK(out.deltas[0].x == doctest::Approx(0.5 * 2.0 + std::sqrt(0.75) * 1.0).epsilon(1e-12));
  }

  SUBCASE("forward-diffusion variance approaches 1 - alpha_bar") {
    Rng rng(8);
    const int k = 7;
    const double expect = 1.0 - s.alpha_bar[k];
    double sum = 0.0, sq = 0.0;
    const int draws = 100000;
    ResidualAction fixed{{{0.3, -0.2}}};
    for (int i = 0; i < draws; ++i) {
      ResidualAction eps{{{rng.normal(), rng.normal()}}};
      const ResidualAction out = forward_diffuse(fixed, k, s, eps);
      sum += out.deltas[0].x;
      sq += out.deltas[0].x * out.deltas[0].x;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    CHECK(var == doctest::Approx(expect).epsilon(0.05));
  }
}

namespace {

// A denoiser whose outputs are the biases of a single identity layer:
// input-independent, so mode outputs can be crafted exactly.
DenoiserModel crafted_model(int n_modes, int t_fut, const Eigen::VectorXd& biases) {
  DenoiserModel model;
  model.n_modes = n_modes;
  model.t_fut = t_fut;
  model.dt_waypoint = 0.5;
  model.schedule = build_schedule(10, ScheduleKind::cosine);
  const int rdim = 2 * t_fut;
  model.norm_mean = Eigen::VectorXd::Zero(rdim);
  model.norm_std = Eigen::VectorXd::Ones(rdim);

  const SimParams sim = [] {
    SimParams s;
    s.grid_size = 4;
    s.route_feat_points = 2;
    s.t_hist = 2;
    return s;
  }();
  const int enc_in = observation_feature_dim(sim) + history_feature_dim(sim.t_hist);
  Layer enc;
  enc.W = Eigen::MatrixXd::Zero(4, enc_in);
  enc.b = Eigen::VectorXd::Zero(4);
  enc.act = Activation::identity;
  model.encoder.layers.push_back(enc);

  const int den_in = rdim + 2 + 4 + history_feature_dim(sim.t_hist) + rdim;
  Layer den;
  den.W = Eigen::MatrixXd::Zero(n_modes * rdim, den_in);
  den.b = biases;
  den.act = Activation::identity;
  model.denoiser.layers.push_back(den);
  model.trained = true;
  return model;
}

TransitionRecord crafted_record(int t_fut) {
  TransitionRecord rec;
  rec.observation.grid_size = 4;
  rec.observation.cell_size = 1.0;
  rec.observation.bev.assign(16, 0);
  rec.observation.route_feat = {{1, 0}, {2, 0}};
  rec.ego_history.frames.assign(2, EgoHistoryFrame{});
  rec.base_action.dt_waypoint = 0.5;
  rec.base_action.waypoints.assign(t_fut, {0, 0});
  rec.applied_action = rec.base_action;
  rec.residual.deltas.assign(t_fut, {0, 0});
  return rec;
}

}  // namespace

TEST_CASE("winner-take-all loss takes the closest mode") {
  const int t_fut = 2;
  const int rdim = 4;
  // Mode 0 error 4.0, mode 1 error 1.0 against a zero target.
  Eigen::VectorXd biases = Eigen::VectorXd::Zero(2 * rdim);
  biases(0) = 2.0;  // |(2,0,0,0)|^2 = 4
  biases(rdim) = 1.0;  // |(1,0,0,0)|^2 = 1
  DenoiserModel model = crafted_model(2, t_fut, biases);
  // The crafted denoiser is input-independent, so the drawn k and eps
  // cannot affect the mode outputs.
  const TransitionRecord rec = crafted_record(t_fut);
  const std::vector<const TransitionRecord*> batch = {&rec};
  Rng rng(3);
  NetGrads eg = NetGrads::zeros_like(model.encoder);
  NetGrads dg = NetGrads::zeros_like(model.denoiser);
  const double loss = adapter_loss(model, batch, rng, eg, dg, 1);
  CHECK(loss == doctest::Approx(1.0));
  // Gradients flow only through the winning mode's rows.
  CHECK(dg.db[0].head(rdim).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(dg.db[0].segment(rdim, rdim).cwiseAbs().maxCoeff() > 0.0);

  SUBCASE("an exact mode match gives zero loss") {
    Eigen::VectorXd b2 = Eigen::VectorXd::Zero(2 * rdim);
    b2(0) = 3.0;  // mode 0 off; mode 1 exactly the target (zero)
    DenoiserModel m2 = crafted_model(2, t_fut, b2);
    Rng rng2(3);
    NetGrads e2 = NetGrads::zeros_like(m2.encoder);
    NetGrads d2 = NetGrads::zeros_like(m2.denoiser);
    CHECK(adapter_loss(m2, batch, rng2, e2, d2, 1) == doctest::Approx(0.0));
  }

  SUBCASE("N = 1 reduces to plain MSE") {
    Eigen::VectorXd b1 = Eigen::VectorXd::Zero(rdim);
    b1(0) = 2.0;
    b1(1) = 1.0;
    DenoiserModel m1 = crafted_model(1, t_fut, b1);
    Rng rng1(3);
    NetGrads e1 = NetGrads::zeros_like(m1.encoder);
    NetGrads d1 = NetGrads::zeros_like(m1.denoiser);
    CHECK(adapter_loss(m1, batch, rng1, e1, d1, 1) == doctest::Approx(5.0));
  }
}

TEST_CASE("ddim sampling: determinism, counts, single-step oracle") {
  const int t_fut = 2;
  const int rdim = 4;
  Eigen::VectorXd biases = Eigen::VectorXd::Zero(2 * rdim);
  for (int i = 0; i < rdim; ++i) {
    biases(i) = 0.25 * i;
    biases(rdim + i) = -0.5 * i;
  }
  const DenoiserModel model = crafted_model(2, t_fut, biases);
  const TransitionRecord rec = crafted_record(t_fut);

  SUBCASE("zero samples give an empty set") {
    Rng rng(1);
    CHECK(ddim_sample(model, rec.observation, rec.ego_history, rec.base_action, 5, 0, rng).empty());
  }

  SUBCASE("same seed, same inputs, identical outputs") {
    Rng a(42), b(42);
    const auto sa = ddim_sample(model, rec.observation, rec.ego_history, rec.base_action, 5, 7, a);
    const auto sb = ddim_sample(model, rec.observation, rec.ego_history, rec.base_action, 5, 7, b);
    REQUIRE(sa.size() == sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
      for (std::size_t d = 0; d < sa[i].deltas.size(); ++d) {
        CHECK(sa[i].deltas[d].x == sb[i].deltas[d].x);
        CHECK(sa[i].deltas[d].y == sb[i].deltas[d].y);
      }
    }
  }

  SUBCASE("inference_steps = 1 returns the committed mode's x0 prediction") {
    Rng rng(9);
    const auto samples =
        ddim_sample(model, rec.observation, rec.ego_history, rec.base_action, 1, 4, rng);
    // With an input-independent denoiser, every chain collapses to the
    // committed mode's bias vector.
    for (const ResidualAction& r : samples) {
      const double first = r.deltas[0].x;
      const bool mode0 = std::abs(first - biases(0)) < 1e-12;
      const bool mode1 = std::abs(first - biases(rdim)) < 1e-12;
      CHECK((mode0 || mode1));
    }
  }

  SUBCASE("untrained model throws") {
    DenoiserModel untrained = model;
    untrained.trained = false;
    Rng rng(1);
    CHECK_THROWS(
        ddim_sample(untrained, rec.observation, rec.ego_history, rec.base_action, 5, 1, rng));
  }
}

TEST_CASE("residual additivity: adapted minus base equals the residual") {
  TrajectoryAction base;
  base.dt_waypoint = 0.5;
  base.waypoints = {{1, 0}, {2, 0}, {3, 0}};
  const ResidualAction r{{{0.2, 0.1}, {-0.3, 0.0}, {0.0, -0.4}}};
  const TrajectoryAction adapted = apply_residual(base, r);
  for (std::size_t i = 0; i < base.waypoints.size(); ++i) {
    CHECK(adapted.waypoints[i].x - base.waypoints[i].x == doctest::Approx(r.deltas[i].x));
    CHECK(adapted.waypoints[i].y - base.waypoints[i].y == doctest::Approx(r.deltas[i].y));
  }
}
