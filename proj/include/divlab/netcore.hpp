#pragma once

// Dense feedforward networks: a stack of affine+activation layers with an
// optional scalar linear head, batched forward/backward under mean squared
// loss, Adam/SGD, and the norm-based Lipschitz/boundedness formulas.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace divlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Activation { relu, sigmoid, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

double activate(Activation a, double x);
// Derivative evaluated at the pre-activation value. relu'(0) is taken as 0.
double activate_derivative(Activation a, double pre);

struct Dense {
  Mat weight;  // out x in, row-major semantics: weight(o, i)
  Vec bias;    // out
  Activation activation = Activation::relu;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

// x -> alpha^T x + beta
struct LinearHead {
  Vec alpha;
  double beta = 0.0;
};

struct Mlp {
  std::vector<Dense> layers;
  std::optional<LinearHead> head;

  std::size_t depth() const { return layers.size(); }
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  // Parameters in layer order: W (row-major), b, then alpha, beta.
  std::vector<double> flatten() const;
  void assign(std::span<const double> params);
};

// Throws ShapeError when layer dimensions do not chain or contain NaN/Inf.
void validate(const Mlp& net);

// A dense layer with zero bias and Gaussian weights of the given std.
Dense gaussian_layer(std::size_t in, std::size_t out, double stddev, Activation act,
                     std::uint64_t seed);

// outer ∘ inner. `inner` must not carry a head.
Mlp compose(const Mlp& inner, const Mlp& outer);
// Layers [0, k) and [k, depth); the head stays with the second part.
std::pair<Mlp, Mlp> split(const Mlp& net, std::size_t k);

Vec forward(const Mlp& net, const Vec& x);
// Columns of `inputs` are samples; returns output_dim x N.
Mat forward_batch(const Mlp& net, const Mat& inputs);

struct Gradients {
  std::vector<Mat> weight;
  std::vector<Vec> bias;
  Vec alpha;  // empty when the net has no head
  double beta = 0.0;

  std::vector<double> flatten() const;
};

// Gradient of sum_n <output_grad_n, net(x_n)> w.r.t. every parameter, i.e.
// backpropagation of a given dL/d(output).
Gradients backward_output(const Mlp& net, const Mat& inputs, const Mat& output_grad);

// Exact gradient of (1/N) sum_n ||net(x_n) - y_n||_2^2 (no 1/2 factor).
Gradients backward(const Mlp& net, const Mat& inputs, const Mat& targets);

double mean_squared_loss(const Mlp& net, const Mat& inputs, const Mat& targets);

struct LossGradient {
  double loss = 0.0;
  Gradients gradients;
};

// Loss and gradient from a single recorded forward pass.
LossGradient loss_and_gradient(const Mlp& net, const Mat& inputs, const Mat& targets);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptMethod { adam, sgd };

struct OptSettings {
  OptMethod method = OptMethod::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptState {
  OptSettings settings;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t steps = 0;
};

OptState make_opt_state(const OptSettings& settings, std::size_t parameter_count);

// One update in place. Adam uses bias-corrected moments.
void step(OptState& state, std::span<double> params, std::span<const double> grads);

// ---------------------------------------------------------------------------
// Norm budgets

struct NormBudget {
  double m_alpha = 1.0;           // bound on ||alpha||_2
  std::vector<double> m_k;        // per layer bound on max(||W||_inf, ||W||_2)
  double d_z = 0.0;               // bound on the input norm
};

void validate(const NormBudget& budget);

// M(alpha) * prod_k M(k)
double lipschitz_bound(const NormBudget& budget);

// 2 * D_Z * M(alpha) * prod_k M(k). Valid for bias-free nets with
// activations satisfying sigma(0) = 0 and ||z||_2 <= D_Z.
double output_bound(const NormBudget& budget);

// Largest singular value by power iteration on W^T W from a fixed start
// vector. Throws NumericError without convergence to `tol` in `max_iter`.
double spectral_norm(const Mat& w, double tol = 1e-10, std::size_t max_iter = 10000);
// Induced infinity norm: max absolute row sum.
double infinity_norm(const Mat& w);

// m_k = max(infinity, spectral) per layer; m_alpha = ||alpha||_2 or 1 when
// the net has no head.
NormBudget measured_norms(const Mlp& net, double d_z = 0.0);

}  // namespace divlab
