#include "divlab/diversity.hpp"
#include "divlab/error.hpp"
#include "divlab/hardness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace divlab;

namespace {

Vec e(std::size_t d, std::size_t i, double sign = 1.0) {
  Vec v = Vec::Zero(static_cast<Eigen::Index>(d));
  v(static_cast<Eigen::Index>(i)) = sign;
  return v;
}

// Latitude-longitude grid on S^2 with both poles and the axis meridians.
std::vector<Vec> latlong(std::size_t n_lat, std::size_t n_lon) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i <= n_lat; ++i) {
    const double theta = std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_lat);
    for (std::size_t j = 0; j < n_lon; ++j) {
      const double phi = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_lon);
      Vec v(3);
      v << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
      out.push_back(v);
    }
  }
  return out;
}

double relu_threshold(const Vec& w, const Vec& x, double eps) {
  return std::max(0.0, w.dot(x) - (1.0 - eps / 4.0));
}

// inf over the grid of the mean squared distance to a constant truth on V'
double grid_excess(const std::vector<Vec>& grid, const std::vector<Vec>& support, double truth, double eps) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& w : grid) {
    double s = 0.0;
    for (const Vec& x : support) {
      const double r = relu_threshold(w, x, eps) - truth;
      s += r * r;
    }
    best = std::min(best, s / static_cast<double>(support.size()));
  }
  return best;
}

}  // namespace

TEST(Packing, AxesInThreeDimensions) {
  const Packing p = make_packing(3, 0.5, PackingStrategy::axes);
  ASSERT_EQ(p.vectors.size(), 6u);
  double max_ip = -1.0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) max_ip = std::max(max_ip, p.vectors[i].dot(p.vectors[j]));
  EXPECT_EQ(max_ip, 0.0);
  EXPECT_EQ(p.vectors[0], e(3, 0));
  EXPECT_EQ(p.vectors[3], e(3, 0, -1.0));
}

TEST(Packing, AxesInOneDimension) {
  const Packing p = make_packing(1, 1.0, PackingStrategy::axes);
  ASSERT_EQ(p.vectors.size(), 2u);
  EXPECT_EQ(p.vectors[0].dot(p.vectors[1]), -1.0);
}

TEST(Packing, GreedySatisfiesInvariantsExhaustively) {
  GreedyOptions g;
  g.count = 50;
  g.seed = 3;
  const Packing p = make_packing(8, 0.9, PackingStrategy::greedy, g);
  EXPECT_EQ(p.requested, 50u);
  EXPECT_EQ(p.complete, p.vectors.size() == 50u);
  for (std::size_t i = 0; i < p.vectors.size(); ++i) {
    EXPECT_NEAR(p.vectors[i].norm(), 1.0, 1e-12);
    for (std::size_t j = 0; j < i; ++j) EXPECT_LE(p.vectors[i].dot(p.vectors[j]), 1.0 - 0.9 + 1e-12);
  }
}

TEST(Packing, ValidationAndErrors) {
  Packing p = make_packing(2, 0.5, PackingStrategy::axes);
  p.vectors.push_back(Vec::Ones(2) / std::sqrt(2.0));
  EXPECT_THROW(validate(p), ContractError);
  EXPECT_THROW(make_packing(0, 0.5, PackingStrategy::axes), ContractError);
  EXPECT_THROW(make_packing(2, 1.5, PackingStrategy::axes), ContractError);
}

TEST(Packing, HomogenizeHalvesSeparation) {
  const Packing h = homogenize(make_packing(3, 0.5, PackingStrategy::axes));
  EXPECT_EQ(h.eps, 0.25);
  for (std::size_t i = 0; i < h.vectors.size(); ++i) {
    EXPECT_EQ(h.vectors[i].size(), 4);
    for (std::size_t j = 0; j < i; ++j) EXPECT_LE(h.vectors[i].dot(h.vectors[j]), 0.5 + 1e-12);
  }
}

TEST(ReluFamily, Examples) {
  const Vec x = e(3, 1);
  EXPECT_DOUBLE_EQ(relu_family_eval(x, x, 0.5), 0.125);
  EXPECT_EQ(relu_family_eval(e(3, 0), x, 0.5), 0.0);
  Vec w(2), y(2);
  w << 0.9, std::sqrt(1.0 - 0.81);
  y << 1.0, 0.0;
  EXPECT_NEAR(relu_family_eval(w, y, 0.5), 0.025, 1e-15);
  EXPECT_THROW(relu_family_eval(2.0 * x, x, 0.5), ContractError);
  EXPECT_THROW(relu_family_eval(e(2, 0), x, 0.5), ShapeError);
}

TEST(ReluInstance, Canonical) {
  const HardInstance inst = build_relu_hard_instance(3, 0.5, {e(3, 0)});
  EXPECT_EQ(inst.u, e(3, 1));
  EXPECT_EQ(inst.support.size(), 4u);
  EXPECT_LE(inst.source_excess, 1e-9);
  EXPECT_NEAR(inst.target_excess, 3.0 * 0.25 / 64.0, 1e-6);
  EXPECT_GE(inst.target_excess, 0.25 / 32.0);
  EXPECT_EQ(inst.lower_bound, 0.0078125);
  EXPECT_TRUE(inst.ratio.infinite);
  EXPECT_TRUE(inst.bound_holds);
}

TEST(ReluInstance, CanonicalAgainstLatLongOracle) {
  const HardInstance inst = build_relu_hard_instance(3, 0.5, {e(3, 0)});
  const auto grid = latlong(200, 400);
  EXPECT_NEAR(grid_excess(grid, inst.support, relu_threshold(e(3, 1), e(3, 1), 0.5), 0.5), 0.01171875, 1e-12);
  EXPECT_NEAR(inst.target_excess, 0.01171875, 1e-6);
  // the source truth vanishes at u, and w = 0 reproduces it on V'
  EXPECT_EQ(grid_excess({Vec::Zero(3)}, inst.support, relu_threshold(e(3, 0), e(3, 1), 0.5), 0.5), 0.0);
}

TEST(ReluInstance, GridRefinementIsStable) {
  const HardInstance inst = build_relu_hard_instance(3, 0.5, {e(3, 0)});
  HardnessEvalOptions coarse, fine;
  coarse.directions = 10000;
  fine.directions = 100000;
  EXPECT_LT(std::abs(evaluate_instance(inst, coarse).target_excess - evaluate_instance(inst, fine).target_excess),
            1e-6);
}

TEST(ReluInstance, SeparationAcrossSettings) {
  for (std::size_t d : {2u, 3u, 4u, 5u})
    for (double eps : {0.25, 0.5, 1.0}) {
      const HardInstance inst = build_relu_hard_instance(d, eps, {e(d, 0)});
      EXPECT_TRUE(inst.bound_holds) << "d " << d << " eps " << eps;
      EXPECT_LE(inst.source_excess, 1e-9);
      EXPECT_GE(inst.target_excess, eps * eps / 32.0 - 1e-9);
    }
  const HardInstance two = build_relu_hard_instance(4, 0.5, {e(4, 0), e(4, 1, -1.0)});
  EXPECT_TRUE(two.bound_holds);
}

TEST(ReluInstance, Homogenized) {
  const HardInstance inst = build_relu_hard_instance(3, 0.5, {e(3, 0)}, std::nullopt, true);
  EXPECT_EQ(inst.u.size(), 4);
  EXPECT_EQ(inst.eps, 0.25);
  EXPECT_LE(inst.source_excess, 1e-9);
  EXPECT_GE(inst.target_excess, inst.lower_bound - 1e-9);
}

TEST(ReluInstance, TooManySourcesIsInfeasible) {
  std::vector<Vec> all;
  for (std::size_t i = 0; i < 3; ++i) {
    all.push_back(e(3, i));
    all.push_back(e(3, i, -1.0));
  }
  EXPECT_THROW(build_relu_hard_instance(3, 0.5, all), ConstructionInfeasible);
  // one vanishing point left leaves V' empty
  all.pop_back();
  EXPECT_THROW(build_relu_hard_instance(3, 0.5, all), ConstructionInfeasible);
}

TEST(ReluInstance, ExplicitTargetMustVanish) {
  EXPECT_THROW(build_relu_hard_instance(3, 0.5, {e(3, 0)}, std::size_t{0}), ContractError);
  const HardInstance inst = build_relu_hard_instance(3, 0.5, {e(3, 0)}, std::size_t{2});
  EXPECT_EQ(inst.u, e(3, 2));
}

TEST(ReluInstance, TargetEqualToSourceHasZeroExcess) {
  HardInstance inst = build_relu_hard_instance(3, 0.5, {e(3, 0)});
  inst.target_param = inst.source_params[0];
  EXPECT_EQ(evaluate_instance(inst).target_excess, 0.0);
}

TEST(GeneralInstance, ReluActivationHasZeroSource) {
  const GeneralActivation act = make_activation("relu", 1.0, 0.0);
  EXPECT_TRUE(activation_margin(act).infinite);
  const HardInstance inst = build_general_hard_instance(act, 10.0, 3, {e(3, 0)});
  EXPECT_EQ(inst.source_excess, 0.0);
  EXPECT_TRUE(inst.ratio.infinite);
  EXPECT_TRUE(inst.bound_holds);
}

TEST(GeneralInstance, Sigmoid) {
  const GeneralActivation act = make_activation("sigmoid", 4.0, -4.0);
  const double M = (1.0 / (1.0 + std::exp(-4.0))) / (1.0 / (1.0 + std::exp(4.0)));
  EXPECT_NEAR(M, std::exp(4.0), 1e-9);
  const ExtendedReal margin = activation_margin(act);
  ASSERT_FALSE(margin.infinite);
  EXPECT_NEAR(margin.value, M, 1e-9 * M);
  const HardInstance inst = build_general_hard_instance(act, M, 3, {e(3, 0)});
  EXPECT_NEAR(inst.lower_bound, (M - 1) * (M - 1) / 8.0, 1e-9);
  EXPECT_TRUE(inst.ratio.at_least(inst.lower_bound - 1e-6));
  EXPECT_TRUE(inst.bound_holds);
  EXPECT_GT(inst.target_excess, 0.0);
  EXPECT_THROW(build_general_hard_instance(act, 2.0 * M, 3, {e(3, 0)}), ContractError);
}

TEST(GeneralInstance, EvalMatchesFormula) {
  const GeneralActivation act = make_activation("tanh", 2.0, -1.0);
  const Vec w = e(2, 0), x = Vec::Ones(2) / std::sqrt(2.0);
  EXPECT_DOUBLE_EQ(general_family_eval(act, w, x), std::tanh(24.0 * w.dot(x) - 14.0 - 8.0));
  EXPECT_THROW(make_activation("gelu", 1.0, 0.0), ContractError);
}

TEST(GeneralInstance, OneDimensionIsInfeasible) {
  const GeneralActivation act = make_activation("sigmoid", 4.0, -4.0);
  EXPECT_THROW(build_general_hard_instance(act, std::exp(4.0), 1, {e(1, 0)}), ConstructionInfeasible);
}

TEST(FiniteView, AgreesWithDiversityEnumeration) {
  const HardInstance inst = build_relu_hard_instance(3, 0.5, {e(3, 0)});
  const FiniteInstance fi = to_finite_instance(inst);
  const ExcessTable t = excess_table(fi);
  EXPECT_EQ(t.best_source(0), 0.0);
  EXPECT_NEAR(t.best_target(0), inst.target_excess, 1e-12);
  EXPECT_EQ(t.best_source(1), 0.0);
  EXPECT_EQ(t.best_target(1), 0.0);
  EXPECT_TRUE(transfer_ratio(fi, 0.0).nu_hat.infinite);
  const auto w = negative_transfer_witness(fi);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(*w, 0u);
}
