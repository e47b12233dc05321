#include "divlab/eluder.hpp"
#include "divlab/error.hpp"
#include "divlab/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace divlab;

namespace {

// All maps {a, b} -> {0, 1}, ordered f00, f01, f10, f11.
FiniteClass binary_maps() { return make_class({{0, 0}, {0, 1}, {1, 0}, {1, 1}}); }

// inf over F of the two-point excess when the learned representation
// collapses x2 onto x1: 1/2 ||f'(x1) - g(x1)||^2 + 1/2 ||f'(x1) - g(x2)||^2.
double two_point(const FiniteClass& F, std::size_t g, std::size_t x1, std::size_t x2) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < F.size(); ++f)
    best = std::min(best, 0.5 * (F.values[f][x1] - F.values[g][x1]).squaredNorm() +
                              0.5 * (F.values[f][x1] - F.values[g][x2]).squaredNorm());
  return best;
}

FiniteClass drop(const FiniteClass& F, std::size_t f) {
  std::vector<std::vector<double>> table;
  for (std::size_t g = 0; g < F.size(); ++g) {
    if (g == f) continue;
    std::vector<double> row;
    for (const Vec& v : F.values[g]) row.push_back(v(0));
    table.push_back(row);
  }
  return make_class(table);
}

}  // namespace

TEST(Dependence, SingletonClassAlwaysDependent) {
  const FiniteClass F = make_class({{0.3, 1.0, -2.0}});
  for (std::size_t x = 0; x < 3; ++x) {
    EXPECT_TRUE(is_dependent(x, {}, F, 0.1));
    EXPECT_TRUE(is_dependent(x, {0, 1}, F, 0.1));
  }
}

TEST(Dependence, BinaryMapsExample) {
  const FiniteClass F = binary_maps();
  EXPECT_FALSE(is_dependent(1, {0}, F, 0.5));
  EXPECT_EQ(is_dependent(1, {0}, F, 0.5), oracle::dependent(F, 1, {0}, 0.25));
}

TEST(Dependence, MemberOfSequenceIsDependent) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const FiniteClass F = oracle::random_dyadic_class(rng, 6, 5);
    for (std::size_t x = 0; x < F.domain_size(); ++x) EXPECT_TRUE(is_dependent(x, {x}, F, 0.5));
  }
}

TEST(Dependence, MatchesOracleOnRandomClasses) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const FiniteClass F = oracle::random_dyadic_class(rng, 6, 5);
    const std::size_t n = F.domain_size();
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      std::vector<std::size_t> seq;
      for (std::size_t y = 0; y < n; ++y)
        if (mask >> y & 1) seq.push_back(y);
      for (std::size_t x = 0; x < n; ++x)
        EXPECT_EQ(is_dependent(x, seq, F, 0.5), oracle::dependent(F, x, seq, 0.25));
    }
  }
}

TEST(Longest, SingletonIsZero) {
  const auto c = eluder_dimension(make_class({{1.0, 2.0}}), 0.5);
  EXPECT_EQ(c.status, SearchStatus::ok);
  EXPECT_EQ(c.dim, 0u);
  EXPECT_TRUE(c.witness.empty());
}

TEST(Longest, BinaryMaps) {
  const auto c = eluder_dimension(binary_maps(), 0.5);
  EXPECT_EQ(c.dim, 2u);
  EXPECT_EQ(c.witness, (std::vector<std::size_t>{0, 1}));
  EXPECT_GE(c.epsilon_used, 0.5);
  EXPECT_EQ(oracle::eluder_dim(binary_maps(), 0.5), 2u);
}

TEST(Longest, TwoConstants) {
  for (std::size_t n : {1u, 3u, 5u}) {
    const FiniteClass F = make_class({std::vector<double>(n, 0.0), std::vector<double>(n, 2.0)});
    EXPECT_EQ(eluder_dimension(F, 0.5).dim, 1u);
    EXPECT_EQ(oracle::eluder_dim(F, 0.5), 1u);
  }
}

TEST(Longest, WitnessIsIndependentAtReportedLevel) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const FiniteClass F = oracle::random_dyadic_class(rng, 6, 5);
    const auto c = eluder_dimension(F, 0.5);
    ASSERT_EQ(c.witness.size(), c.dim);
    EXPECT_GE(c.epsilon_used_sq, 0.25);
    std::vector<std::size_t> prefix;
    for (std::size_t x : c.witness) {
      EXPECT_FALSE(oracle::dependent(F, x, prefix, c.epsilon_used_sq));
      prefix.push_back(x);
    }
  }
}

TEST(Longest, MatchesOracleOnRandomClasses) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const FiniteClass F = oracle::random_dyadic_class(rng, 6, 5);
    const auto longest = eluder_dimension(F, 0.5);
    const auto cover = shortest_cover_dimension(F, 0.5);
    EXPECT_EQ(longest.dim, oracle::eluder_dim(F, 0.5)) << "trial " << trial;
    EXPECT_EQ(cover.dim, oracle::shortest_cover(F, 0.5)) << "trial " << trial;
    EXPECT_LE(cover.dim, longest.dim) << "trial " << trial;
  }
}

TEST(Longest, NonIncreasingInEps) {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const FiniteClass F = oracle::random_dyadic_class(rng, 6, 5);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double eps : {0.1, 0.25, 0.4, 0.5, 0.75, 1.0, 1.5, 2.5}) {
      const std::size_t d = eluder_dimension(F, eps).dim;
      EXPECT_LE(d, prev) << "trial " << trial << " eps " << eps;
      prev = d;
    }
  }
}

TEST(Longest, SubclassNeverIncreases) {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const FiniteClass F = oracle::random_dyadic_class(rng, 6, 5);
    if (F.size() < 2) continue;
    const std::size_t full = eluder_dimension(F, 0.5).dim;
    for (std::size_t f = 0; f < F.size(); ++f) EXPECT_LE(eluder_dimension(drop(F, f), 0.5).dim, full);
  }
}

TEST(Longest, BudgetExceededIsTyped) {
  Rng rng(7);
  std::vector<std::vector<double>> table(6, std::vector<double>(12));
  for (auto& row : table)
    for (double& v : row) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  SearchOptions opts;
  opts.node_cap = 5;
  EXPECT_EQ(eluder_dimension(make_class(table), 0.5, opts).status, SearchStatus::budget_exceeded);
  EXPECT_EQ(shortest_cover_dimension(make_class(table), 0.5, opts).status, SearchStatus::budget_exceeded);
}

TEST(Cover, SingletonAndBinaryMaps) {
  EXPECT_EQ(shortest_cover_dimension(make_class({{1.0, 2.0}}), 0.5).dim, 0u);
  EXPECT_EQ(shortest_cover_dimension(binary_maps(), 0.5).dim, 2u);
}

TEST(Dual, TransposeAndInvolution) {
  const FiniteClass F = binary_maps();
  const FiniteClass D = dual_class(F);
  EXPECT_EQ(D.size(), 2u);
  EXPECT_EQ(D.domain_size(), 4u);
  for (std::size_t f = 0; f < F.size(); ++f)
    for (std::size_t x = 0; x < F.domain_size(); ++x) EXPECT_EQ(D.values[x][f], F.values[f][x]);
  const FiniteClass DD = dual_class(D);
  ASSERT_EQ(DD.size(), F.size());
  for (std::size_t f = 0; f < F.size(); ++f) EXPECT_EQ(DD.values[f], F.values[f]);
}

TEST(Dual, EluderOfDualMatchesOracle) {
  const FiniteClass D = dual_class(binary_maps());
  EXPECT_EQ(eluder_dimension(D, 0.5).dim, oracle::eluder_dim(D, 0.5));
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const FiniteClass Dr = dual_class(oracle::random_dyadic_class(rng, 5, 4));
    EXPECT_EQ(eluder_dimension(Dr, 0.5).dim, oracle::eluder_dim(Dr, 0.5));
  }
}

TEST(Adversarial, BinaryMapsSingleTask) {
  const FiniteClass F = binary_maps();
  const double eps = 0.5;
  // only the constant maps f00 and f11 keep the single pair (a, b) within eps
  for (std::size_t chosen : {0u, 3u}) {
    const AdversarialTask a = adversarial_task(F, {chosen}, eps);
    EXPECT_NE(a.next_task, chosen);
    EXPECT_LE(a.source_gap, eps * eps);
    EXPECT_GT(a.target_gap, eps * eps);
    EXPECT_LE(a.source_excess, eps * eps / 2.0);
    EXPECT_GE(a.target_excess, eps * eps / 4.0);
    EXPECT_DOUBLE_EQ(a.source_excess, two_point(F, chosen, a.x1, a.x2));
    EXPECT_DOUBLE_EQ(a.target_excess, two_point(F, a.next_task, a.x1, a.x2));
    EXPECT_TRUE(a.ratio.at_least(0.5));
    EXPECT_DOUBLE_EQ(a.true_distribution[a.x1] + a.true_distribution[a.x2], 1.0);
    EXPECT_EQ(a.learned_distribution[a.x1], 1.0);
  }
  // f01 and f10 separate a from b by 1 > eps^2, so every other task is dependent
  for (std::size_t chosen : {1u, 2u}) EXPECT_THROW(adversarial_task(F, {chosen}, eps), ContractError);
}

TEST(Adversarial, RatioAtLeastHalfTOnRandomClasses) {
  Rng rng(9);
  int built = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const FiniteClass F = oracle::random_dyadic_class(rng, 6, 5);
    const std::size_t t = 1 + static_cast<std::size_t>(trial % 3);
    if (F.size() <= t) continue;
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < t; ++i) chosen.push_back(i);
    try {
      const AdversarialTask a = adversarial_task(F, chosen, 0.5);
      ++built;
      EXPECT_TRUE(a.ratio.at_least(static_cast<double>(t) / 2.0)) << "trial " << trial;
      EXPECT_LE(a.source_excess * static_cast<double>(t), 0.25 / 2.0 + 1e-15);
    } catch (const ContractError&) {
    }
  }
  EXPECT_GT(built, 20);
}

TEST(Adversarial, AllDependentRaises) {
  EXPECT_THROW(adversarial_task(make_class({{0, 0}, {0, 0.1}}), {0}, 0.5), ContractError);
}

TEST(Classes, Validation) {
  FiniteClass F = binary_maps();
  F.values[1].pop_back();
  EXPECT_THROW(validate(F), ShapeError);
}
