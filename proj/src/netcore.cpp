#include "divlab/netcore.hpp"

#include "divlab/error.hpp"
#include "divlab/rng.hpp"

#include <cmath>
#include <string>

namespace divlab {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "identity" || name == "linear") return Activation::identity;
  throw ContractError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case Activation::identity:
      return x;
  }
  return x;
}

double activate_derivative(Activation a, double pre) {
  switch (a) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-pre));
      return s * (1.0 - s);
    }
    case Activation::identity:
      return 1.0;
  }
  return 1.0;
}

std::size_t Mlp::input_dim() const {
  if (!layers.empty()) return layers.front().in_dim();
  if (head) return static_cast<std::size_t>(head->alpha.size());
  return 0;
}

std::size_t Mlp::output_dim() const {
  if (head) return 1;
  if (!layers.empty()) return layers.back().out_dim();
  return 0;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  if (head) n += static_cast<std::size_t>(head->alpha.size()) + 1;
  return n;
}

std::vector<double> Mlp::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  if (head) {
    for (Eigen::Index i = 0; i < head->alpha.size(); ++i) out.push_back(head->alpha(i));
    out.push_back(head->beta);
  }
  return out;
}

void Mlp::assign(std::span<const double> params) {
  if (params.size() != parameter_count())
    throw ShapeError("parameter vector has " + std::to_string(params.size()) + " entries, net has " +
                     std::to_string(parameter_count()));
  std::size_t k = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = params[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = params[k++];
  }
  if (head) {
    for (Eigen::Index i = 0; i < head->alpha.size(); ++i) head->alpha(i) = params[k++];
    head->beta = params[k++];
  }
}

void validate(const Mlp& net) {
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    if (l.bias.size() != l.weight.rows())
      throw ShapeError("layer " + std::to_string(k) + ": bias length does not match output dim");
    if (k > 0 && l.in_dim() != net.layers[k - 1].out_dim())
      throw ShapeError("layer " + std::to_string(k) + ": input dim " + std::to_string(l.in_dim()) +
                       " does not chain with previous output dim " +
                       std::to_string(net.layers[k - 1].out_dim()));
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw ShapeError("layer " + std::to_string(k) + " has non-finite parameters");
  }
  if (net.head) {
    if (!net.layers.empty() &&
        static_cast<std::size_t>(net.head->alpha.size()) != net.layers.back().out_dim())
      throw ShapeError("head dimension does not match last layer output");
    if (!net.head->alpha.allFinite() || !std::isfinite(net.head->beta))
      throw ShapeError("head has non-finite parameters");
  }
}

Dense gaussian_layer(std::size_t in, std::size_t out, double stddev, Activation act,
                     std::uint64_t seed) {
  Rng rng(seed);
  Dense layer;
  layer.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = stddev * rng.normal();
  layer.bias = Vec::Zero(static_cast<Eigen::Index>(out));
  layer.activation = act;
  return layer;
}

Mlp compose(const Mlp& inner, const Mlp& outer) {
  if (inner.head) throw ContractError("compose: inner net must not have a head");
  if (inner.output_dim() != outer.input_dim())
    throw ShapeError("compose: inner output dim " + std::to_string(inner.output_dim()) +
                     " != outer input dim " + std::to_string(outer.input_dim()));
  Mlp net;
  net.layers = inner.layers;
  net.layers.insert(net.layers.end(), outer.layers.begin(), outer.layers.end());
  net.head = outer.head;
  return net;
}

std::pair<Mlp, Mlp> split(const Mlp& net, std::size_t k) {
  if (k > net.layers.size()) throw ContractError("split index beyond depth");
  Mlp first, second;
  first.layers.assign(net.layers.begin(), net.layers.begin() + static_cast<std::ptrdiff_t>(k));
  second.layers.assign(net.layers.begin() + static_cast<std::ptrdiff_t>(k), net.layers.end());
  second.head = net.head;
  return {std::move(first), std::move(second)};
}

namespace {

void check_input(const Mlp& net, Eigen::Index rows) {
  if (net.layers.empty() && !net.head) return;
  if (static_cast<std::size_t>(rows) != net.input_dim())
    throw ShapeError("input has dimension " + std::to_string(rows) + ", net expects " +
                     std::to_string(net.input_dim()));
}

void apply_activation(Activation a, Mat& m) {
  switch (a) {
    case Activation::identity:
      return;
    case Activation::relu:
      m = m.cwiseMax(0.0);
      return;
    case Activation::sigmoid:
      m = m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      return;
  }
}

struct Tape {
  std::vector<Mat> pre;   // pre-activations per layer
  std::vector<Mat> post;  // post[0] = inputs, post[k+1] = layer k output
};

Tape record(const Mlp& net, const Mat& inputs) {
  Tape tape;
  tape.post.reserve(net.layers.size() + 1);
  tape.pre.reserve(net.layers.size());
  tape.post.push_back(inputs);
  for (const auto& l : net.layers) {
    Mat z = l.weight * tape.post.back();
    z.colwise() += l.bias;
    Mat a = z;
    apply_activation(l.activation, a);
    tape.pre.push_back(std::move(z));
    tape.post.push_back(std::move(a));
  }
  return tape;
}

}  // namespace

Mat forward_batch(const Mlp& net, const Mat& inputs) {
  check_input(net, inputs.rows());
  Mat a = inputs;
  for (const auto& l : net.layers) {
    Mat z = l.weight * a;
    z.colwise() += l.bias;
    apply_activation(l.activation, z);
    a = std::move(z);
  }
  if (net.head) {
    Mat out = net.head->alpha.transpose() * a;
    out.array() += net.head->beta;
    return out;
  }
  return a;
}

Vec forward(const Mlp& net, const Vec& x) {
  Mat out = forward_batch(net, x);
  return out.col(0);
}

std::vector<double> Gradients::flatten() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < weight.size(); ++k) {
    for (Eigen::Index r = 0; r < weight[k].rows(); ++r)
      for (Eigen::Index c = 0; c < weight[k].cols(); ++c) out.push_back(weight[k](r, c));
    for (Eigen::Index r = 0; r < bias[k].size(); ++r) out.push_back(bias[k](r));
  }
  if (alpha.size() > 0) {
    for (Eigen::Index i = 0; i < alpha.size(); ++i) out.push_back(alpha(i));
    out.push_back(beta);
  }
  return out;
}

namespace {

Gradients backprop(const Mlp& net, const Tape& tape, const Mat& output_grad) {
  Gradients g;
  g.weight.resize(net.layers.size());
  g.bias.resize(net.layers.size());

  Mat upstream;  // dL/d(post-activation of last layer)
  if (net.head) {
    g.alpha = tape.post.back() * output_grad.transpose();
    g.beta = output_grad.sum();
    upstream = net.head->alpha * output_grad;
  } else {
    upstream = output_grad;
  }

  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& l = net.layers[k];
    Mat dz = std::move(upstream);
    const Mat& pre = tape.pre[k];
    switch (l.activation) {
      case Activation::identity:
        break;
      case Activation::relu:
        // relu'(0) = 0
        dz.array() *= (pre.array() > 0.0).cast<double>();
        break;
      case Activation::sigmoid:
        dz.array() *= tape.post[k + 1].array() * (1.0 - tape.post[k + 1].array());
        break;
    }
    g.weight[k].noalias() = dz * tape.post[k].transpose();
    g.bias[k] = dz.rowwise().sum();
    if (k > 0) upstream.noalias() = l.weight.transpose() * dz;
  }
  return g;
}

Mat tape_output(const Mlp& net, const Tape& tape) {
  if (!net.head) return tape.post.back();
  Mat out = net.head->alpha.transpose() * tape.post.back();
  out.array() += net.head->beta;
  return out;
}

}  // namespace

Gradients backward_output(const Mlp& net, const Mat& inputs, const Mat& output_grad) {
  check_input(net, inputs.rows());
  if (inputs.cols() == 0) throw ContractError("backward: empty batch");
  if (output_grad.cols() != inputs.cols() ||
      static_cast<std::size_t>(output_grad.rows()) != net.output_dim())
    throw ShapeError("backward: output gradient shape does not match net output");
  return backprop(net, record(net, inputs), output_grad);
}

Gradients backward(const Mlp& net, const Mat& inputs, const Mat& targets) {
  return loss_and_gradient(net, inputs, targets).gradients;
}

LossGradient loss_and_gradient(const Mlp& net, const Mat& inputs, const Mat& targets) {
  check_input(net, inputs.rows());
  if (inputs.cols() == 0) throw ContractError("backward: empty batch");
  if (targets.cols() != inputs.cols())
    throw ShapeError("backward: inputs and targets have different sample counts");
  const Tape tape = record(net, inputs);
  const Mat residual = tape_output(net, tape) - targets;
  if (residual.rows() != targets.rows())
    throw ShapeError("backward: target dimension " + std::to_string(targets.rows()) + " != net output " +
                     std::to_string(net.output_dim()));
  const double n = static_cast<double>(inputs.cols());
  LossGradient out;
  out.loss = residual.squaredNorm() / n;
  out.gradients = backprop(net, tape, (2.0 / n) * residual);
  return out;
}

double mean_squared_loss(const Mlp& net, const Mat& inputs, const Mat& targets) {
  if (inputs.cols() == 0) throw ContractError("loss: empty batch");
  const Mat out = forward_batch(net, inputs);
  if (out.rows() != targets.rows() || out.cols() != targets.cols())
    throw ShapeError("loss: target shape does not match net output");
  return (out - targets).squaredNorm() / static_cast<double>(inputs.cols());
}

// ---------------------------------------------------------------------------

void validate(const NormBudget& budget) {
  if (!(budget.m_alpha >= 0.0) || !(budget.d_z >= 0.0))
    throw ContractError("norm budget entries must be non-negative");
  for (double m : budget.m_k)
    if (!(m >= 0.0)) throw ContractError("norm budget entries must be non-negative");
}

double lipschitz_bound(const NormBudget& budget) {
  validate(budget);
  double prod = budget.m_alpha;
  for (double m : budget.m_k) prod *= m;
  return prod;
}

double output_bound(const NormBudget& budget) {
  return 2.0 * budget.d_z * lipschitz_bound(budget);
}

double infinity_norm(const Mat& w) {
  if (w.size() == 0) return 0.0;
  return w.cwiseAbs().rowwise().sum().maxCoeff();
}

double spectral_norm(const Mat& w, double tol, std::size_t max_iter) {
  if (w.size() == 0 || w.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  Rng rng(0x5EED5EEDULL);
  Vec v(w.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  v.normalize();
  double sigma = (w * v).norm();
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vec u = w * v;
    Vec next = w.transpose() * u;
    const double n = next.norm();
    if (n == 0.0) {
      // v lies in the null space of W^T W; restart from a coordinate axis.
      v = Vec::Unit(w.cols(), static_cast<Eigen::Index>(it % static_cast<std::size_t>(w.cols())));
      continue;
    }
    v = next / n;
    const double updated = (w * v).norm();
    if (std::abs(updated - sigma) <= tol * std::max(updated, 1e-300)) return updated;
    sigma = updated;
  }
  throw NumericError("spectral norm power iteration did not converge", max_iter);
}

NormBudget measured_norms(const Mlp& net, double d_z) {
  validate(net);
  NormBudget b;
  b.d_z = d_z;
  b.m_alpha = net.head ? net.head->alpha.norm() : 1.0;
  for (const auto& l : net.layers) b.m_k.push_back(std::max(infinity_norm(l.weight), spectral_norm(l.weight)));
  return b;
}

}  // namespace divlab
