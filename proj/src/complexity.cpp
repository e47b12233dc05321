#include "divlab/complexity.hpp"

#include "divlab/error.hpp"
#include "divlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace divlab {

namespace {

Mat stack_columns(const std::vector<Vec>& data) {
  Mat x(data.front().size(), static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].size() != x.rows()) throw ShapeError("data points have inconsistent dimensions");
    x.col(static_cast<Eigen::Index>(i)) = data[i];
  }
  return x;
}

void check_family(const NetFamily& fam) {
  if (fam.widths.empty()) throw ContractError("net family needs at least an input width");
  if (fam.budget.m_k.size() + 1 != fam.widths.size())
    throw ContractError("net family budget has " + std::to_string(fam.budget.m_k.size()) +
                        " layer bounds for " + std::to_string(fam.widths.size() - 1) + " layers");
  validate(fam.budget);
}

double objective(const Mlp& net, const Mat& x, const Mat& w_scaled) {
  return (forward_batch(net, x).array() * w_scaled.array()).sum();
}

SupResult ascend(const NetFamily& fam, const Mat& x, const Mat& w_scaled, std::uint64_t seed,
                 const AscentOptions& opts) {
  SupResult best{-std::numeric_limits<double>::infinity(), false};
  for (std::size_t r = 0; r < std::max<std::size_t>(opts.restarts, 1); ++r) {
    Mlp net = make_family_member(fam, derive_seed(seed, "restart", r));
    double value = objective(net, x, w_scaled);
    const double start = value;
    double stepsize = 1.0;
    for (std::size_t s = 0; s < opts.steps; ++s) {
      const Gradients g = backward_output(net, x, w_scaled);
      Mlp trial = net;
      for (std::size_t k = 0; k < trial.layers.size(); ++k) trial.layers[k].weight += stepsize * g.weight[k];
      trial.head->alpha += stepsize * g.alpha;
      project_to_budget(trial, fam.budget);
      const double v = objective(trial, x, w_scaled);
      if (v > value) {
        net = std::move(trial);
        value = v;
        stepsize = std::min(stepsize * 2.0, 1e12);
      } else {
        stepsize *= 0.5;
        if (stepsize < 1e-14) break;
      }
    }
    if (value > start) best.improved = true;
    best.value = std::max(best.value, value);
  }
  return best;
}

ComplexityEstimate estimate(const FunctionClass& cls, const std::vector<Vec>& data, std::size_t n_mc,
                            std::uint64_t seed, const AscentOptions& opts, bool gaussian) {
  if (data.empty()) throw ContractError("complexity: data must be non-empty");
  if (n_mc < 1) throw ContractError("complexity: n_mc must be >= 1");
  const std::size_t r = output_dim(cls, data);
  ComplexityEstimate est;
  est.n_mc = n_mc;
  est.sup_method = std::holds_alternative<FiniteList>(cls)   ? SupMethod::exact_enumeration
                   : std::holds_alternative<LinearBall>(cls) ? SupMethod::closed_form
                                                             : SupMethod::projected_ascent;
  std::vector<double> values(n_mc);
  std::vector<Vec> weights(data.size(), Vec(static_cast<Eigen::Index>(r)));
  for (std::size_t j = 0; j < n_mc; ++j) {
    Rng rng = make_stream(seed, "draw", j);
    for (auto& w : weights)
      for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = gaussian ? rng.normal() : rng.sign();
    const SupResult s = class_supremum(cls, data, weights, derive_seed(seed, "ascent", j), opts);
    if (!s.improved) est.low_confidence = true;
    values[j] = s.value;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  est.mean = sum / static_cast<double>(n_mc);
  if (n_mc > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - est.mean) * (v - est.mean);
    est.std_error = std::sqrt(ss / static_cast<double>(n_mc - 1) / static_cast<double>(n_mc));
  }
  return est;
}

}  // namespace

std::size_t output_dim(const FunctionClass& cls, const std::vector<Vec>& data) {
  if (const auto* fl = std::get_if<FiniteList>(&cls)) {
    if (fl->members.empty()) throw ContractError("finite class is empty");
    return static_cast<std::size_t>(fl->members.front()(data.front()).size());
  }
  return 1;
}

void project_to_budget(Mlp& net, const NormBudget& budget) {
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    Mat& w = net.layers[k].weight;
    const double n = std::max(infinity_norm(w), spectral_norm(w));
    if (n > budget.m_k[k]) w *= budget.m_k[k] / n;
  }
  if (net.head) {
    const double n = net.head->alpha.norm();
    if (n > budget.m_alpha) net.head->alpha *= budget.m_alpha / n;
  }
}

Mlp make_family_member(const NetFamily& fam, std::uint64_t seed) {
  check_family(fam);
  Mlp net;
  for (std::size_t k = 0; k + 1 < fam.widths.size(); ++k)
    net.layers.push_back(gaussian_layer(fam.widths[k], fam.widths[k + 1], 1.0, fam.activation,
                                        derive_seed(seed, "layer", k)));
  Rng rng(derive_seed(seed, "head"));
  LinearHead head;
  head.alpha.resize(static_cast<Eigen::Index>(fam.widths.back()));
  for (Eigen::Index i = 0; i < head.alpha.size(); ++i) head.alpha(i) = rng.normal();
  net.head = head;
  project_to_budget(net, fam.budget);
  return net;
}

SupResult class_supremum(const FunctionClass& cls, const std::vector<Vec>& data,
                         const std::vector<Vec>& weights, std::uint64_t seed, const AscentOptions& opts) {
  if (data.empty() || weights.size() != data.size())
    throw ContractError("supremum: need one weight vector per data point");
  const double scale = 1.0 / std::sqrt(static_cast<double>(data.size()));

  if (const auto* fl = std::get_if<FiniteList>(&cls)) {
    if (fl->members.empty()) throw ContractError("finite class is empty");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& q : fl->members) {
      double s = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec out = q(data[i]);
        if (out.size() != weights[i].size()) throw ShapeError("class member output dim mismatch");
        s += weights[i].dot(out);
      }
      best = std::max(best, s * scale);
    }
    return {best, true};
  }

  if (const auto* ball = std::get_if<LinearBall>(&cls)) {
    Vec v = Vec::Zero(data.front().size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data[i].size() != v.size()) throw ShapeError("data points have inconsistent dimensions");
      v += weights[i](0) * data[i];
    }
    return {ball->radius * (v * scale).norm(), true};
  }

  const auto& fam = std::get<NetFamily>(cls);
  check_family(fam);
  const Mat x = stack_columns(data);
  if (static_cast<std::size_t>(x.rows()) != fam.widths.front())
    throw ShapeError("data dimension does not match net family input width");
  Mat w_scaled(1, x.cols());
  for (std::size_t i = 0; i < weights.size(); ++i) w_scaled(0, static_cast<Eigen::Index>(i)) = weights[i](0) * scale;
  return ascend(fam, x, w_scaled, seed, opts);
}

ComplexityEstimate gaussian_complexity(const FunctionClass& cls, const std::vector<Vec>& data,
                                       std::size_t n_mc, std::uint64_t seed, const AscentOptions& opts) {
  return estimate(cls, data, n_mc, seed, opts, true);
}

ComplexityEstimate rademacher_complexity(const FunctionClass& cls, const std::vector<Vec>& data,
                                         std::size_t n_mc, std::uint64_t seed, const AscentOptions& opts) {
  return estimate(cls, data, n_mc, seed, opts, false);
}

// ---------------------------------------------------------------------------

double dnn_bound(const NormBudget& budget, std::size_t K, std::size_t d_out, std::size_t n) {
  if (n < 1 || d_out < 1) throw ContractError("dnn_bound: n and d_out must be >= 1");
  const double root = std::sqrt(static_cast<double>(K) + 2.0 + std::log(static_cast<double>(d_out)));
  return 2.0 * budget.d_z * root * lipschitz_bound(budget) / std::sqrt(static_cast<double>(n));
}

double chain_bound(double d_x, double lipschitz_f, double g_h, double g_f_max, std::size_t n,
                   std::size_t T) {
  if (n < 1 || T < 1) throw ContractError("chain_bound: n and T must be >= 1");
  const double nt = static_cast<double>(n) * static_cast<double>(T);
  return 4.0 * d_x / std::pow(nt, 1.5) + 128.0 * (lipschitz_f * g_h + g_f_max) * std::log(nt);
}

double deviation_term(double g_hat, double n, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("deviation_term: delta must lie in (0, 1)");
  if (!(n >= 1.0)) throw ContractError("deviation_term: n must be >= 1");
  return std::sqrt(2.0 * std::numbers::pi) * g_hat / std::sqrt(n) +
         std::sqrt(9.0 * std::log(2.0 / delta) / (2.0 * n));
}

double target_bound(double nu, double mu, double excess_source, double g_hat_target, double n_ta,
                    double delta) {
  if (!(nu >= 0.0) || !(mu >= 0.0) || !(excess_source >= 0.0))
    throw ContractError("target_bound: nu, mu and excess_source must be >= 0");
  return nu * excess_source + mu + deviation_term(g_hat_target, n_ta, delta);
}

}  // namespace divlab
