#include "mpa/nn.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace mpa {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh_: return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh_;
  throw std::invalid_argument("unknown activation: " + s);
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += static_cast<std::size_t>(l.W.size()) + l.b.size();
  return n;
}

DenseNet make_net(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1)
    throw std::invalid_argument("make_net: dims/acts mismatch");
  DenseNet net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    Layer l;
    l.W.resize(dims[i + 1], dims[i]);
    const double limit = std::sqrt(6.0 / dims[i]);
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = rng.uniform(-limit, limit);
    l.b = Eigen::VectorXd::Zero(dims[i + 1]);
    l.act = acts[i];
    net.layers.push_back(std::move(l));
  }
  return net;
}

namespace {

Eigen::VectorXd activate(const Eigen::VectorXd& z, Activation act) {
  switch (act) {
    case Activation::identity: return z;
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh_: return z.array().tanh().matrix();
  }
  return z;
}

Eigen::VectorXd activate_grad(const Eigen::VectorXd& pre, const Eigen::VectorXd& post,
                              Activation act) {
  switch (act) {
    case Activation::identity: return Eigen::VectorXd::Ones(pre.size());
    case Activation::relu: {
      Eigen::VectorXd g(pre.size());
      for (Eigen::Index i = 0; i < pre.size(); ++i) g(i) = pre(i) > 0.0 ? 1.0 : 0.0;
      return g;
    }
    case Activation::tanh_: return (1.0 - post.array().square()).matrix();
  }
  return Eigen::VectorXd::Ones(pre.size());
}

}  // namespace

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& x, ForwardCache* cache) {
  if (x.size() != net.input_dim()) throw std::invalid_argument("forward: input dim mismatch");
  if (cache != nullptr) {
    cache->input = x;
    cache->pre.clear();
    cache->post.clear();
  }
  Eigen::VectorXd h = x;
  for (const Layer& l : net.layers) {
    Eigen::VectorXd z = l.W * h + l.b;
    h = activate(z, l.act);
    if (cache != nullptr) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(h);
    }
  }
  return h;
}

NetGrads NetGrads::zeros_like(const DenseNet& net) {
  NetGrads g;
  for (const Layer& l : net.layers) {
    g.dW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
    g.db.push_back(Eigen::VectorXd::Zero(l.b.size()));
  }
  return g;
}

void NetGrads::accumulate(const NetGrads& other) {
  for (std::size_t i = 0; i < dW.size(); ++i) {
    dW[i] += other.dW[i];
    db[i] += other.db[i];
  }
}

void NetGrads::scale(double s) {
  for (std::size_t i = 0; i < dW.size(); ++i) {
    dW[i] *= s;
    db[i] *= s;
  }
}

Eigen::VectorXd backward(const DenseNet& net, const ForwardCache& cache,
                         const Eigen::VectorXd& dLdy, NetGrads& grads) {
  const std::size_t n = net.layers.size();
  if (cache.pre.size() != n || cache.post.size() != n)
    throw std::invalid_argument("backward: cache does not match net");
  if (grads.dW.size() != n) throw std::invalid_argument("backward: grads not sized for net");
  if (dLdy.size() != net.output_dim()) throw std::invalid_argument("backward: dLdy dim mismatch");

  Eigen::VectorXd delta = dLdy;
  for (std::size_t li = n; li-- > 0;) {
    const Layer& l = net.layers[li];
    if (cache.pre[li].size() != l.b.size())
      throw std::invalid_argument("backward: stale cache");
    delta = delta.cwiseProduct(activate_grad(cache.pre[li], cache.post[li], l.act));
    const Eigen::VectorXd& in = li == 0 ? cache.input : cache.post[li - 1];
    grads.dW[li].noalias() += delta * in.transpose();
    grads.db[li] += delta;
    delta = l.W.transpose() * delta;
  }
  return delta;  // dL/dinput
}

AdamState AdamState::zeros_like(const DenseNet& net) {
  AdamState s;
  for (const Layer& l : net.layers) {
    s.mW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
    s.vW.push_back(Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()));
    s.mb.push_back(Eigen::VectorXd::Zero(l.b.size()));
    s.vb.push_back(Eigen::VectorXd::Zero(l.b.size()));
  }
  return s;
}

void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state, const AdamConfig& cfg) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    state.mW[i] = cfg.beta1 * state.mW[i] + (1.0 - cfg.beta1) * grads.dW[i];
    state.vW[i] = cfg.beta2 * state.vW[i] + (1.0 - cfg.beta2) * grads.dW[i].cwiseProduct(grads.dW[i]);
    state.mb[i] = cfg.beta1 * state.mb[i] + (1.0 - cfg.beta1) * grads.db[i];
    state.vb[i] = cfg.beta2 * state.vb[i] + (1.0 - cfg.beta2) * grads.db[i].cwiseProduct(grads.db[i]);
    net.layers[i].W -=
        (cfg.lr * (state.mW[i] / bc1).array() / ((state.vW[i] / bc2).array().sqrt() + cfg.eps))
            .matrix();
    net.layers[i].b -=
        (cfg.lr * (state.mb[i] / bc1).array() / ((state.vb[i] / bc2).array().sqrt() + cfg.eps))
            .matrix();
  }
}

Eigen::VectorXd flatten_params(const DenseNet& net) {
  Eigen::VectorXd theta(net.param_count());
  Eigen::Index at = 0;
  for (const Layer& l : net.layers) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) theta(at++) = l.W(r, c);
    for (Eigen::Index i = 0; i < l.b.size(); ++i) theta(at++) = l.b(i);
  }
  return theta;
}

void set_params(DenseNet& net, const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != net.param_count())
    throw std::invalid_argument("set_params: size mismatch");
  Eigen::Index at = 0;
  for (Layer& l : net.layers) {
    for (Eigen::Index r = 0; r < l.W.rows(); ++r)
      for (Eigen::Index c = 0; c < l.W.cols(); ++c) l.W(r, c) = theta(at++);
    for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = theta(at++);
  }
}

Eigen::VectorXd flatten_grads(const NetGrads& grads) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < grads.dW.size(); ++i)
    n += static_cast<std::size_t>(grads.dW[i].size()) + grads.db[i].size();
  Eigen::VectorXd g(n);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < grads.dW.size(); ++i) {
    for (Eigen::Index r = 0; r < grads.dW[i].rows(); ++r)
      for (Eigen::Index c = 0; c < grads.dW[i].cols(); ++c) g(at++) = grads.dW[i](r, c);
    for (Eigen::Index j = 0; j < grads.db[i].size(); ++j) g(at++) = grads.db[i](j);
  }
  return g;
}

namespace {

// Relative error with a dead zone for near-zero pairs, where central
// differences across activation kinks produce O(h) artifacts.
double rel_err(double a, double b) {
  if (std::max(std::abs(a), std::abs(b)) < 1e-5) return 0.0;
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

}  // namespace

GradCheckReport grad_check(const DenseNet& net, const Eigen::VectorXd& input, double tolerance) {
  // Loss: 0.5 * |f(x)|^2, so dL/dy = y.
  ForwardCache cache;
  const Eigen::VectorXd y = forward(net, input, &cache);
  NetGrads grads = NetGrads::zeros_like(net);
  backward(net, cache, y, grads);

  DenseNet probe = net;
  const double h = 1e-5;
  GradCheckReport report;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    for (int block = 0; block < 2; ++block) {
      BlockReport br;
      br.layer = static_cast<int>(li);
      br.weight_block = block == 0;
      const Eigen::Index count =
          block == 0 ? net.layers[li].W.size() : net.layers[li].b.size();
      for (Eigen::Index k = 0; k < count; ++k) {
        auto entry = [&](DenseNet& n) -> double& {
          return block == 0 ? n.layers[li].W.data()[k] : n.layers[li].b.data()[k];
        };
        const double orig = entry(probe);
        entry(probe) = orig + h;
        const double lp = 0.5 * forward(probe, input).squaredNorm();
        entry(probe) = orig - h;
        const double lm = 0.5 * forward(probe, input).squaredNorm();
        entry(probe) = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = block == 0 ? grads.dW[li].data()[k] : grads.db[li].data()[k];
        br.max_rel_err = std::max(br.max_rel_err, rel_err(fd, an));
      }
      br.pass = br.max_rel_err <= tolerance;
      report.max_rel_err = std::max(report.max_rel_err, br.max_rel_err);
      report.pass = report.pass && br.pass;
      report.blocks.push_back(br);
    }
  }
  return report;
}

GradCheckReport finite_diff_check(const Eigen::VectorXd& theta,
                                  const std::function<double(const Eigen::VectorXd&)>& loss,
                                  const Eigen::VectorXd& analytic_grad, double tolerance) {
  GradCheckReport report;
  BlockReport br;
  const double h = 1e-5;
  Eigen::VectorXd probe = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    probe(k) = theta(k) + h;
    const double lp = loss(probe);
    probe(k) = theta(k) - h;
    const double lm = loss(probe);
    probe(k) = theta(k);
    const double fd = (lp - lm) / (2.0 * h);
    br.max_rel_err = std::max(br.max_rel_err, rel_err(fd, analytic_grad(k)));
  }
  br.pass = br.max_rel_err <= tolerance;
  report.blocks.push_back(br);
  report.max_rel_err = br.max_rel_err;
  report.pass = br.pass;
  return report;
}

}  // namespace mpa
