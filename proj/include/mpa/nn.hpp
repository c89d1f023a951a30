#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mpa/rng.hpp"

namespace mpa {

enum class Activation { identity, relu, tanh_ };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Layer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
  Activation act = Activation::identity;
};

struct DenseNet {
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().W.cols()); }
  int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows()); }
  std::size_t param_count() const;
};

// He-style uniform init scaled by fan-in; biases start at zero. dims is
// {in, hidden..., out}; acts has dims.size()-1 entries.
DenseNet make_net(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng);

struct ForwardCache {
  Eigen::VectorXd input;
  std::vector<Eigen::VectorXd> pre;   // affine outputs per layer
  std::vector<Eigen::VectorXd> post;  // activated outputs per layer
};

// Deterministic affine + activation composition. ReLU subgradient at 0
// is 0 throughout.
Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& x,
                        ForwardCache* cache = nullptr);

struct NetGrads {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;

  static NetGrads zeros_like(const DenseNet& net);
  void accumulate(const NetGrads& other);
  void scale(double s);
};

// Exact reverse-mode gradients; returns dL/dinput and accumulates
// parameter gradients into grads. Throws when the cache does not match
// the net.
Eigen::VectorXd backward(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::VectorXd& dLdy, NetGrads& grads);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> mW, vW;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;

  static AdamState zeros_like(const DenseNet& net);
};

// Bias-corrected Adam update.
void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state, const AdamConfig& cfg);

// Flattened parameter access, layer by layer (W row-major, then b).
Eigen::VectorXd flatten_params(const DenseNet& net);
void set_params(DenseNet& net, const Eigen::VectorXd& theta);
Eigen::VectorXd flatten_grads(const NetGrads& grads);

struct BlockReport {
  int layer = 0;
  bool weight_block = true;  // false: bias block
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  bool pass = true;
  double max_rel_err = 0.0;
  std::vector<BlockReport> blocks;
};

// Central finite differences (step 1e-5) of the scalar loss
// 0.5*|f(x)|^2 against the analytic backward pass, compared per
// parameter block. Intended for nets of at most ~1e4 parameters.
GradCheckReport grad_check(const DenseNet& net, const Eigen::VectorXd& input, double tolerance);

// Same comparison for an arbitrary scalar loss over a parameter vector.
GradCheckReport finite_diff_check(const Eigen::VectorXd& theta,
                                  const std::function<double(const Eigen::VectorXd&)>& loss,
                                  const Eigen::VectorXd& analytic_grad, double tolerance);

}  // namespace mpa
