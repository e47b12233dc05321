#pragma once

// Monte-Carlo Gaussian/Rademacher complexity with 1/sqrt(N) normalization,
//   G_N(Q) = E_g sup_q (1/sqrt N) sum_i g_i^T q(x_i),
// and closed-form evaluators for the complexity-based bounds.

#include "divlab/netcore.hpp"

#include <cstdint>
#include <functional>
#include <variant>
#include <vector>

namespace divlab {

struct FiniteList {
  std::vector<std::function<Vec(const Vec&)>> members;
};

// {x -> w^T x : ||w||_2 <= radius}
struct LinearBall {
  double radius = 1.0;
};

// Bias-free nets with per-layer widths, a common activation, and a scalar
// linear head (beta = 0), constrained by a NormBudget.
struct NetFamily {
  std::vector<std::size_t> widths;  // input dim, then each layer's output dim
  Activation activation = Activation::relu;
  NormBudget budget;
};

using FunctionClass = std::variant<FiniteList, LinearBall, NetFamily>;

enum class SupMethod { exact_enumeration, closed_form, projected_ascent };

struct ComplexityEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_mc = 0;
  SupMethod sup_method = SupMethod::exact_enumeration;
  // Some draw saw no ascent restart improve on its starting point.
  bool low_confidence = false;
};

struct AscentOptions {
  std::size_t restarts = 8;
  std::size_t steps = 200;
};

struct SupResult {
  double value = 0.0;
  bool improved = true;
};

// sup_q sum_i <weights_i, q(x_i)> / sqrt(N) for one draw of weights
// (one vector per data point, each of the class's output dimension).
SupResult class_supremum(const FunctionClass& cls, const std::vector<Vec>& data,
                         const std::vector<Vec>& weights, std::uint64_t seed,
                         const AscentOptions& opts = {});

std::size_t output_dim(const FunctionClass& cls, const std::vector<Vec>& data);

// Draw j uses stream (seed, j), so the estimate does not depend on the
// order in which draws are evaluated.
ComplexityEstimate gaussian_complexity(const FunctionClass& cls, const std::vector<Vec>& data,
                                       std::size_t n_mc, std::uint64_t seed,
                                       const AscentOptions& opts = {});
ComplexityEstimate rademacher_complexity(const FunctionClass& cls, const std::vector<Vec>& data,
                                         std::size_t n_mc, std::uint64_t seed,
                                         const AscentOptions& opts = {});

// Projects each layer onto max(||W||_inf, ||W||_2) <= M(k) and alpha onto
// ||alpha|| <= M(alpha) by rescaling.
void project_to_budget(Mlp& net, const NormBudget& budget);
Mlp make_family_member(const NetFamily& fam, std::uint64_t seed);

// 2 D_Z sqrt(K + 2 + ln d_out) M(alpha) prod M(k) / sqrt(n)
double dnn_bound(const NormBudget& budget, std::size_t K, std::size_t d_out, std::size_t n);

// 4 D_X / (nT)^{3/2} + 128 (L_F G_H + G_F_max) ln(nT)
double chain_bound(double d_x, double lipschitz_f, double g_h, double g_f_max, std::size_t n,
                   std::size_t T);

// sqrt(2 pi) G / sqrt(n) + sqrt(9 ln(2/delta) / (2n)), 0 < delta < 1
double deviation_term(double g_hat, double n, double delta);

// nu * E_so + mu + deviation_term(G, n_ta, delta)
double target_bound(double nu, double mu, double excess_source, double g_hat_target, double n_ta,
                    double delta);

}  // namespace divlab
