#include "divlab/rng.hpp"
#include "divlab/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace divlab;

TEST(GroundTruth, DefaultSourceHeadIsOrthonormal) {
  const GroundTruth gt = make_ground_truth(Architecture{}, 1);
  ASSERT_EQ(gt.f_sources.size(), 1u);
  ASSERT_EQ(gt.f_sources[0].depth(), 1u);
  const Mat& W = gt.f_sources[0].layers[0].weight;
  ASSERT_EQ(W.rows(), 4);
  ASSERT_EQ(W.cols(), 4);
  EXPECT_LT((W.transpose() * W - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_FALSE(gt.orthonormal_fallback);
}

TEST(GroundTruth, BiasesZeroAndShapesChain) {
  Architecture a;
  a.K_ta = 2;
  const GroundTruth gt = make_ground_truth(a, 3);
  EXPECT_EQ(gt.h_star.depth(), 5u);
  EXPECT_EQ(gt.h_star.input_dim(), 4u);
  EXPECT_EQ(gt.f_target.output_dim(), 1u);
  EXPECT_EQ(gt.f_target.input_dim(), gt.h_star.output_dim());
  for (const auto& l : gt.h_star.layers) EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& l : gt.f_target.layers) EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GroundTruth, DeepSourceHeadIsGaussianWithExpectedSpread) {
  Architecture a;
  a.K_so = 2;
  // pool weights across seeds until 10^4 draws
  double s = 0.0, s2 = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; n < 10000; ++seed) {
    const GroundTruth gt = make_ground_truth(a, seed);
    for (const auto& l : gt.f_sources[0].layers)
      for (Eigen::Index i = 0; i < l.weight.size(); ++i) {
        s += l.weight.data()[i];
        s2 += l.weight.data()[i] * l.weight.data()[i];
        ++n;
      }
  }
  const double mean = s / static_cast<double>(n);
  const double sd = std::sqrt(s2 / static_cast<double>(n) - mean * mean);
  EXPECT_NEAR(sd, 1.0 / std::sqrt(4.0), 0.05 / std::sqrt(4.0));
}

TEST(GroundTruth, WideOutputFallsBackToGaussian) {
  Architecture a;
  a.p = 6;
  const GroundTruth gt = make_ground_truth(a, 2);
  EXPECT_TRUE(gt.orthonormal_fallback);
  EXPECT_EQ(gt.f_sources[0].output_dim(), 6u);
}

TEST(GroundTruth, Deterministic) {
  const GroundTruth a = make_ground_truth(Architecture{}, 42);
  const GroundTruth b = make_ground_truth(Architecture{}, 42);
  EXPECT_EQ(a.h_star.flatten(), b.h_star.flatten());
  EXPECT_EQ(a.f_sources[0].flatten(), b.f_sources[0].flatten());
  EXPECT_EQ(a.f_target.flatten(), b.f_target.flatten());
  const GroundTruth c = make_ground_truth(Architecture{}, 43);
  EXPECT_NE(a.h_star.flatten(), c.h_star.flatten());
}

TEST(GroundTruth, TargetChainDependsOnlyOnTotalDepth) {
  Architecture a, b;
  a.K = 5;
  a.K_ta = 1;
  b.K = 2;
  b.K_ta = 4;
  const GroundTruth ga = make_ground_truth(a, 9);
  const GroundTruth gb = make_ground_truth(b, 9);
  const Mat X = sample_inputs(4, 20, 1);
  EXPECT_LT((mean_function(ga, Task::target(), X) - mean_function(gb, Task::target(), X)).norm(), 1e-12);
}

TEST(Sampling, NoiseFreeLabelsEqualMeanFunction) {
  const GroundTruth gt = make_ground_truth(Architecture{}, 5, 0.0);
  const Dataset d = sample_dataset(gt, Task::source(0), 50, 8);
  EXPECT_EQ(d.labels, mean_function(gt, Task::source(0), d.inputs));
}

TEST(Sampling, ResidualSpreadMatchesSigma) {
  const GroundTruth gt = make_ground_truth(Architecture{}, 5, 0.1);
  const Dataset d = sample_dataset(gt, Task::target(), 10000, 8);
  const Mat r = d.labels - mean_function(gt, Task::target(), d.inputs);
  const double mean = r.mean();
  const double sd = std::sqrt((r.array() - mean).square().sum() / static_cast<double>(r.size() - 1));
  EXPECT_NEAR(sd, 0.1, 0.005);
}

TEST(Sampling, ResidualsUncorrelatedWithInputs) {
  const GroundTruth gt = make_ground_truth(Architecture{}, 6, 0.1);
  const Dataset d = sample_dataset(gt, Task::target(), 10000, 4);
  const Eigen::RowVectorXd r = d.labels - mean_function(gt, Task::target(), d.inputs);
  for (Eigen::Index j = 0; j < d.inputs.rows(); ++j) {
    const Eigen::RowVectorXd x = d.inputs.row(j);
    const double xm = x.mean(), rm = r.mean();
    const double cov = ((x.array() - xm) * (r.array() - rm)).sum();
    const double rho = cov / std::sqrt((x.array() - xm).square().sum() * (r.array() - rm).square().sum());
    EXPECT_LT(std::abs(rho), 0.05);
  }
}

TEST(Sampling, LabelDimensions) {
  const GroundTruth gt = make_ground_truth(Architecture{}, 1);
  EXPECT_EQ(sample_dataset(gt, Task::target(), 3, 1).labels.rows(), 1);
  EXPECT_EQ(sample_dataset(gt, Task::source(0), 3, 1).labels.rows(), 4);
}

TEST(Sampling, Deterministic) {
  const GroundTruth gt = make_ground_truth(Architecture{}, 1);
  const Dataset a = sample_dataset(gt, Task::source(0), 30, 77);
  const Dataset b = sample_dataset(gt, Task::source(0), 30, 77);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(Sampling, CsvHeader) {
  const GroundTruth gt = make_ground_truth(Architecture{}, 1);
  std::ostringstream os;
  write_csv(sample_dataset(gt, Task::target(), 2, 1), os);
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "x_0,x_1,x_2,x_3,y_0");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 2u);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  EXPECT_EQ(derive_seed(1, "run", 3), derive_seed(1, "run", 3));
  EXPECT_NE(derive_seed(1, "run", 3), derive_seed(1, "run", 4));
  EXPECT_NE(derive_seed(1, "run", 3), derive_seed(1, "eval", 3));
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
}

TEST(Rng, NormalMoments) {
  Rng r(12);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double g = r.normal();
    s += g;
    s2 += g * g;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}
