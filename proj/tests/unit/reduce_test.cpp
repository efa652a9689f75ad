#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "ddfh/error.hpp"
#include "ddfh/reduce/tsne.hpp"
#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

namespace ddfh {
namespace {

TsneConfig quick(std::uint64_t seed = 1, int iterations = 400) {
  TsneConfig c;
  c.perplexity = 20.0;
  c.iterations = iterations;
  c.seed = seed;
  return c;
}

TEST(PerplexityCalibration, EquidistantNeighboursAreUniform) {
  const std::vector<double> d = {2.0, 2.0};
  const auto r = perplexity_calibration(d, 2.0);
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.probabilities[0], 0.5, 1e-15);
  EXPECT_NEAR(r.probabilities[1], 0.5, 1e-15);
}

TEST(PerplexityCalibration, MatchesRootFindingOracle) {
  const std::vector<double> d = {1.0, 4.0};
  const auto r = perplexity_calibration(d, 1.5);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(oracle::conditional_entropy(d, r.beta), std::log(1.5), 1e-5);
  EXPECT_NEAR(r.beta, oracle::perplexity_beta(d, 1.5), 1e-3);
  // Frozen from the bisection oracle.
  EXPECT_NEAR(oracle::perplexity_beta(d, 1.5), 0.6043317643467367, 1e-9);
}

TEST(PerplexityCalibration, RandomRowsReachTargetEntropy) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> d(60);
    for (auto& v : d) v = rng.uniform(0.0, 50.0);
    const double perp = rng.uniform(2.0, 15.0);
    const auto r = perplexity_calibration(d, perp);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(oracle::conditional_entropy(d, r.beta), std::log(perp), 1e-5);
  }
}

TEST(PerplexityCalibration, AllZeroDistancesAreDegenerate) {
  const std::vector<double> d = {0.0, 0.0, 0.0};
  const auto r = perplexity_calibration(d, 2.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.beta, 1.0);
}

TEST(PerplexityCalibration, StopsAfterIterationBound) {
  // A target above log(m) is unreachable.
  const std::vector<double> d = {1.0, 2.0, 3.0};
  const auto r = perplexity_calibration(d, 10.0);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 100);
}

TEST(EffectivePerplexity, ClampsToThirdOfNeighbours) {
  EXPECT_DOUBLE_EQ(effective_perplexity(10, 100.0), 3.0);
  EXPECT_DOUBLE_EQ(effective_perplexity(1000, 100.0), 100.0);
}

TEST(JointAffinities, SymmetricAndNormalized) {
  std::vector<int> labels;
  const auto x = test::two_clusters(5, 80, 6, 5.0, labels);
  const auto a = joint_affinities(x, 10.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < 80; ++i) {
    for (std::size_t j = 0; j < 80; ++j) {
      sum += a.p(i, j);
      EXPECT_LE(std::abs(a.p(i, j) - a.p(j, i)), 1e-12);
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_EQ(a.degenerate_rows, 0u);
}

TEST(TsneReduce, IdenticalRowsStayFinite) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(4, 3, 1.5);
  const auto r = tsne_reduce(x, quick());
  EXPECT_EQ(r.diagnostics.degenerate_rows, 4u);
  for (const auto& p : r.coords) {
    EXPECT_TRUE(std::isfinite(p[0]));
    EXPECT_TRUE(std::isfinite(p[1]));
  }
}

TEST(TsneReduce, SeparatesTwoClusters) {
  std::vector<int> labels;
  const auto x = test::two_clusters(42, 200, 16, 20.0, labels);
  TsneConfig c;
  c.seed = 7;
  const auto r = tsne_reduce(x, c);
  EXPECT_LT(r.diagnostics.final_kl, r.diagnostics.initial_kl);
  EXPECT_GE(test::nearest_centroid_accuracy(r.coords, labels), 0.95);
  EXPECT_TRUE(r.diagnostics.perplexity_clamped);
  EXPECT_DOUBLE_EQ(r.diagnostics.effective_perplexity, 199.0 / 3.0);
  EXPECT_FALSE(r.diagnostics.warnings.empty());
}

TEST(TsneReduce, OutputIsCentered) {
  std::vector<int> labels;
  const auto x = test::two_clusters(1, 60, 5, 8.0, labels);
  const auto r = tsne_reduce(x, quick());
  double mx = 0.0, my = 0.0;
  for (const auto& p : r.coords) {
    mx += p[0];
    my += p[1];
  }
  EXPECT_LE(std::abs(mx / 60.0), 1e-6);
  EXPECT_LE(std::abs(my / 60.0), 1e-6);
}

TEST(TsneReduce, DeterministicPerSeed) {
  std::vector<int> labels;
  const auto x = test::two_clusters(2, 50, 4, 6.0, labels);
  const auto a = tsne_reduce(x, quick(3));
  const auto b = tsne_reduce(x, quick(3));
  const auto c = tsne_reduce(x, quick(4));
  EXPECT_EQ(a.coords, b.coords);
  EXPECT_NE(a.coords, c.coords);
}

TEST(TsneReduce, KlDecreasesOnRandomInputs) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(40, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const auto r = tsne_reduce(x, quick(seed, 1000));
    EXPECT_LT(r.diagnostics.final_kl, r.diagnostics.initial_kl) << "seed " << seed;
  }
}

TEST(TsneReduce, RejectsTinyOrNonFiniteInput) {
  EXPECT_THROW(tsne_reduce(Eigen::MatrixXd::Zero(3, 2), quick()), DataError);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 2);
  x(2, 1) = std::nan("");
  EXPECT_THROW(tsne_reduce(x, quick()), DataError);
  TsneConfig bad = quick();
  bad.perplexity = 0.0;
  EXPECT_THROW(tsne_reduce(Eigen::MatrixXd::Random(10, 2), bad), ConfigError);
}

TEST(TsneKl, InvariantUnderRigidMotion) {
  std::vector<int> labels;
  const auto x = test::two_clusters(9, 40, 4, 5.0, labels);
  const auto r = tsne_reduce(x, quick(1, 200));
  const auto a = joint_affinities(x, effective_perplexity(40, 20.0));
  const double base = tsne_kl_divergence(a.p, r.coords);
  const double th = 0.7;
  ReducedCoords moved;
  for (const auto& p : r.coords) {
    moved.push_back({std::cos(th) * p[0] - std::sin(th) * p[1] + 3.0, std::sin(th) * p[0] + std::cos(th) * p[1] - 1.0});
  }
  EXPECT_NEAR(tsne_kl_divergence(a.p, moved), base, 1e-9);
}

}  // namespace
}  // namespace ddfh
