#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "wsnm/bench.hpp"
#include "wsnm/rpca.hpp"

using namespace wsnm;
using wsnm::testing::random_matrix;

namespace {

SyntheticData small_case(double pr, double pe, std::uint64_t seed, int m = 60) {
  SyntheticSpec spec;
  spec.m = m;
  spec.rank_fraction = pr;
  spec.corruption_fraction = pe;
  spec.seed = seed;
  return gen_lowrank_sparse(spec);
}

double rel_err(const DenseMatrix& Xh, const DenseMatrix& X) { return (Xh - X).squaredNorm() / X.squaredNorm(); }

}  // namespace

TEST(SoftThreshold, Examples) {
  SplitMix64 rng(1);
  const DenseMatrix M = random_matrix(rng, 6, 5);
  EXPECT_TRUE((soft_threshold_matrix(M, 0.0).array() == M.array()).all());
  DenseMatrix two(1, 2);
  two << 3.0, -0.5;
  const DenseMatrix out = soft_threshold_matrix(two, 1.0);
  EXPECT_EQ(out(0, 0), 2.0);
  EXPECT_EQ(out(0, 1), 0.0);
  const DenseMatrix S = soft_threshold_matrix(M, 0.7);
  for (Eigen::Index i = 0; i < M.size(); ++i) {
    const double v = M.data()[i];
    const double expect = v > 0.7 ? v - 0.7 : (v < -0.7 ? v + 0.7 : 0.0);
    EXPECT_EQ(S.data()[i], expect);
  }
  EXPECT_THROW(soft_threshold_matrix(M, -1.0), DomainError);
}

TEST(RpcaWeights, Examples) {
  const auto w = rpca_weights(Eigen::Vector2d(2, 1), 1.0, 1, 1);
  EXPECT_NEAR(w(0), 0.5, 1e-15);
  EXPECT_NEAR(w(1), 1.0, 1e-15);
  EXPECT_TRUE(w.certified());
  const auto tie = rpca_weights(Eigen::Vector2d(5, 5), 1.0, 3, 4);
  EXPECT_EQ(tie(0), tie(1));
  EXPECT_TRUE(tie.certified());
  const auto zero = rpca_weights(Eigen::Vector3d(3, 1, 0), 2.0, 4, 4);
  EXPECT_TRUE(std::isfinite(zero(2)));
  EXPECT_NEAR(zero(2), 2.0 * 4.0 / kWeightEps, 1e-3 * zero(2));
  EXPECT_GT(zero(2), zero(1));
}

TEST(EstimateRank, Examples) {
  DenseMatrix D = DenseMatrix::Zero(3, 3);
  D.diagonal() << 3, 2, 1e-12;
  EXPECT_EQ(estimate_rank(D), 2);
  EXPECT_EQ(estimate_rank(DenseMatrix::Zero(4, 4)), 0);
  EXPECT_THROW(estimate_rank(D, 0.0), DomainError);
}

TEST(RpcaConfig, Validation) {
  RpcaConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_NEAR(cfg.weight_scale(), std::pow(10.0, 1.0 / 0.7), 1e-12);
  cfg.rho = 1.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.p = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.tol = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  EXPECT_EQ(weight_mode_from_string("fixed_from_y"), WeightMode::kFixedFromY);
  EXPECT_EQ(to_string(WeightMode::kUniform), "uniform");
  EXPECT_THROW(weight_mode_from_string("sorted"), DomainError);
}

TEST(WsnmRpca, ExactLowRankWithoutCorruption) {
  const auto data = small_case(5.0 / 60.0, 0.0, 3);
  ASSERT_EQ(estimate_rank(data.X), 5);
  const auto res = wsnm_rpca(data.Y, RpcaConfig{});
  EXPECT_TRUE(res.converged);
  EXPECT_LE(rel_err(res.X, data.X), 1e-6);
  EXPECT_LE(res.E.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(WsnmRpca, ZeroObservation) {
  for (const auto& res : {wsnm_rpca(DenseMatrix::Zero(5, 4), {}), nnm_rpca(DenseMatrix::Zero(5, 4), {})}) {
    EXPECT_EQ(res.iterations, 1);
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.X.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(res.E.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(res.estimated_rank, 0);
  }
}

TEST(WsnmRpca, RecoversSparselyCorruptedLowRank) {
  const auto data = small_case(0.05, 0.05, 7);
  const auto w = wsnm_rpca(data.Y, RpcaConfig{});
  const auto n = nnm_rpca(data.Y, RpcaConfig{});
  EXPECT_LE(rel_err(w.X, data.X), 1e-5);
  EXPECT_LE(rel_err(n.X, data.X), 1e-5);
  EXPECT_EQ(w.estimated_rank, 3);
  EXPECT_EQ(n.estimated_rank, 3);
  EXPECT_LE((w.E - data.E).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(WsnmRpca, ConvergenceDiagnostics) {
  const auto data = small_case(0.1, 0.05, 9);
  RpcaConfig cfg;
  for (auto mode : {WeightMode::kReweighted, WeightMode::kFixedFromY}) {
    cfg.weight_mode = mode;
    const auto res = wsnm_rpca(data.Y, cfg);
    ASSERT_TRUE(res.converged);
    ASSERT_EQ(res.residual_history.size(), static_cast<std::size_t>(res.iterations));
    ASSERT_EQ(res.step_history.size(), res.residual_history.size());
    ASSERT_EQ(res.multiplier_norm_history.size(), res.residual_history.size());
    EXPECT_LE(res.residual_history.back(), cfg.tol);
    EXPECT_LE(res.step_history.back(), cfg.step_tol);
    EXPECT_LE((data.Y - res.X - res.E).norm() / data.Y.norm(), cfg.tol);
    // smoothed step tail is non-increasing over its last 10 entries
    const auto& s = res.step_history;
    ASSERT_GE(s.size(), 12u);
    std::vector<double> smooth;
    for (std::size_t k = s.size() - 10; k < s.size(); ++k) smooth.push_back((s[k - 2] + s[k - 1] + s[k]) / 3.0);
    for (std::size_t k = 1; k < smooth.size(); ++k) EXPECT_LE(smooth[k], smooth[k - 1] * (1 + 1e-9));
    for (double z : res.multiplier_norm_history) EXPECT_TRUE(std::isfinite(z));
  }
}

TEST(WsnmRpca, UniformP1ReproducesNnm) {
  const auto data = small_case(0.1, 0.1, 11);
  RpcaConfig cfg;
  cfg.p = 1.0;
  cfg.weight_mode = WeightMode::kUniform;
  cfg.uniform_weight = 1.0;
  cfg.tol = 1e-300;
  for (int k = 1; k <= 5; ++k) {
    cfg.max_iters = k;
    const auto w = wsnm_rpca(data.Y, cfg);
    const auto n = nnm_rpca(data.Y, cfg, 1.0);
    EXPECT_LE((w.X - n.X).cwiseAbs().maxCoeff(), 1e-8) << "iteration " << k;
    EXPECT_LE((w.E - n.E).cwiseAbs().maxCoeff(), 1e-8) << "iteration " << k;
    EXPECT_NEAR(w.residual_history.back(), n.residual_history.back(), 1e-8);
  }
}

TEST(WsnmRpca, DeterministicHistories) {
  const auto data = small_case(0.1, 0.1, 13);
  const auto a = wsnm_rpca(data.Y, RpcaConfig{});
  const auto b = wsnm_rpca(data.Y, RpcaConfig{});
  EXPECT_EQ(a.residual_history, b.residual_history);
  EXPECT_TRUE((a.X.array() == b.X.array()).all());
}

TEST(WsnmRpca, IterationCapIsFlagged) {
  const auto data = small_case(0.1, 0.1, 15);
  RpcaConfig cfg;
  cfg.max_iters = 3;
  const auto res = wsnm_rpca(data.Y, cfg);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.iterations, 3);
}

TEST(WsnmRpca, RejectsNonFiniteInputAndBadLambda) {
  DenseMatrix Y = DenseMatrix::Ones(4, 4);
  Y(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(wsnm_rpca(Y, {}), DomainError);
  EXPECT_THROW(nnm_rpca(DenseMatrix::Ones(4, 4), {}, -1.0), DomainError);
}

TEST(WsnmRpca, WideMatrix) {
  SplitMix64 rng(17);
  const DenseMatrix X = random_matrix(rng, 20, 2) * random_matrix(rng, 2, 45);
  const auto res = wsnm_rpca(X, RpcaConfig{});
  EXPECT_LE(rel_err(res.X, X), 1e-6);
  EXPECT_EQ(res.estimated_rank, 2);
}
