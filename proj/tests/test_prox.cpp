#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "wsnm/prox.hpp"

using namespace wsnm;
using wsnm::testing::random_matrix;
using wsnm::testing::random_nondescending;
using wsnm::testing::random_orthogonal;

namespace {

DenseMatrix diag2(double a, double b) {
  DenseMatrix D = DenseMatrix::Zero(2, 2);
  D.diagonal() << a, b;
  return D;
}

WeightVector<double> weights(std::initializer_list<double> v) {
  DenseVector w(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) w(i++) = x;
  return WeightVector<double>(w);
}

}  // namespace

TEST(WeightVector, CertificateAndValidation) {
  EXPECT_TRUE(weights({0.1, 0.1, 2.0}).certified());
  EXPECT_FALSE(weights({2.0, 1.0}).certified());
  EXPECT_THROW(weights({1.0, -0.5}), DomainError);
  EXPECT_THROW(weights({1.0, std::nan("")}), DomainError);
}

TEST(SchattenNorm, Examples) {
  EXPECT_NEAR(weighted_schatten_norm_p(diag2(2, 1), weights({1, 1}), 1.0), 3.0, 1e-14);
  EXPECT_EQ(weighted_schatten_norm_p(DenseMatrix::Zero(3, 2), weights({1, 4}), 0.4), 0.0);
  EXPECT_NEAR(weighted_schatten_norm_p(diag2(4, 1), weights({1, 2}), 0.5), 4.0, 1e-14);
  EXPECT_THROW(weighted_schatten_norm_p(diag2(4, 1), weights({1, 2, 3}), 0.5), DimensionMismatch);
}

TEST(WsnmProx, ZeroWeightsIsIdentity) {
  SplitMix64 rng(1);
  const DenseMatrix Y = random_matrix(rng, 7, 4);
  EXPECT_LE((wsnm_prox(Y, WeightVector<double>::uniform(4, 0.0), 0.3, 2.0) - Y).norm(), 1e-12);
}

TEST(WsnmProx, UniformP1IsSingularValueSoftThresholding) {
  SplitMix64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const DenseMatrix Y = random_matrix(rng, 20, 15);
    const double w = rng.uniform(0.0, 4.0);
    const auto f = svd(Y);
    const DenseVector s = (f.singular_values.array() - w).max(0.0).matrix();
    const DenseMatrix closed = f.U * s.asDiagonal() * f.V.transpose();
    EXPECT_LE((wsnm_prox(Y, WeightVector<double>::uniform(15, w), 1.0, 0.5) - closed).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(WsnmProx, DiagonalExampleMatchesGridOracle) {
  // frozen from an exhaustive 1e-4 grid over [0,3]^2 with d1 >= d2, refined
  const double d1 = 2.898261160232017;
  const double d2 = 0.29886623689876984;
  const DenseMatrix X = wsnm_prox(diag2(3.0, 0.5), weights({0.2, 0.2}), 0.7, 0.5);
  EXPECT_NEAR(X(0, 0), d1, 1e-5);
  EXPECT_NEAR(X(1, 1), d2, 1e-5);
  EXPECT_NEAR(X(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(X(1, 0), 0.0, 1e-12);
  // the shared oracle reproduces the frozen values
  const auto o = oracle::coupled_2x2(3.0, 0.5, 0.2, 0.2, 0.7, 0.5);
  EXPECT_NEAR(o.first, d1, 1e-6);
  EXPECT_NEAR(o.second, d2, 1e-6);
}

TEST(WsnmProx, CoupledGridAgreementOnRandomDiagonals) {
  SplitMix64 rng(3);
  for (int t = 0; t < 10; ++t) {
    const double s1 = rng.uniform(0.5, 4.0);
    const double s2 = rng.uniform(0.0, s1);
    const DenseVector w = random_nondescending(rng, 2, 1.5);
    const double p = std::vector<double>{0.3, 0.7, 1.0}[rng.below(3)];
    const DenseMatrix X = wsnm_prox(diag2(s1, s2), WeightVector<double>(w), p, 0.5);
    const auto o = oracle::coupled_2x2(s1, s2, w(0), w(1), p, 0.5);
    EXPECT_NEAR(X(0, 0), o.first, 1e-5);
    EXPECT_NEAR(X(1, 1), o.second, 1e-5);
  }
}

TEST(WsnmProx, OutputSingularValuesStayOrdered) {
  SplitMix64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const DenseMatrix Y = random_matrix(rng, 12, 9);
    const WeightVector<double> w(random_nondescending(rng, 9, 3.0));
    for (double p : {0.3, 0.7, 1.0}) {
      const auto res = wsnm_prox_full(Y, w, p, 0.5);
      for (Eigen::Index i = 1; i < res.sigma_out.size(); ++i) {
        EXPECT_GE(res.sigma_out(i - 1), res.sigma_out(i) - 1e-10);
      }
    }
  }
}

TEST(WsnmProx, UnitaryInvariance) {
  SplitMix64 rng(5);
  const DenseMatrix Y = random_matrix(rng, 8, 6);
  const DenseMatrix Q = random_orthogonal(rng, 8);
  const DenseMatrix R = random_orthogonal(rng, 6);
  const WeightVector<double> w(random_nondescending(rng, 6, 2.0));
  const DenseMatrix lhs = wsnm_prox(DenseMatrix(Q * Y * R.transpose()), w, 0.6, 0.8);
  const DenseMatrix rhs = Q * wsnm_prox(Y, w, 0.6, 0.8) * R.transpose();
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(WsnmProx, ObjectiveDominance) {
  SplitMix64 rng(6);
  const DenseMatrix Y = random_matrix(rng, 10, 7);
  const WeightVector<double> w(random_nondescending(rng, 7, 2.0));
  const double p = 0.5;
  const double a = 0.7;
  const DenseMatrix X = wsnm_prox(Y, w, p, a);
  const double fx = wsnm_objective(X, Y, w, p, a);
  EXPECT_LE(fx, wsnm_objective(Y, Y, w, p, a) + 1e-12);
  EXPECT_LE(fx, wsnm_objective(DenseMatrix::Zero(10, 7), Y, w, p, a) + 1e-12);
  for (int t = 0; t < 100; ++t) {
    const DenseMatrix P = X + 1e-3 * random_matrix(rng, 10, 7);
    EXPECT_LE(fx, wsnm_objective(P, Y, w, p, a) + 1e-12);
  }
}

TEST(WsnmProx, RejectsUncertifiedWeightsUnlessAllowed) {
  const DenseMatrix Y = diag2(3, 1);
  EXPECT_THROW(wsnm_prox(Y, weights({2, 1}), 0.5, 0.5), DomainError);
  EXPECT_NO_THROW(wsnm_prox(Y, weights({2, 1}), 0.5, 0.5, WeightOrder::kAllowUncertified));
  EXPECT_THROW(wsnm_prox(Y, weights({1, 2, 3}), 0.5, 0.5), DimensionMismatch);
  EXPECT_THROW(wsnm_prox(Y, weights({1, 2}), 0.5, 0.0), DomainError);
  EXPECT_THROW(wsnm_prox(Y, weights({1, 2}), 1.5, 0.5), DomainError);
}

TEST(WsnmProx, TiedSingularValuesAreDeterministic) {
  const DenseMatrix Y = DenseMatrix::Identity(3, 3) * 2.0;
  const auto a = wsnm_prox_full(Y, weights({0.1, 0.5, 3.0}), 0.8, 0.5);
  const auto b = wsnm_prox_full(Y, weights({0.1, 0.5, 3.0}), 0.8, 0.5);
  EXPECT_TRUE((a.X.array() == b.X.array()).all());
  EXPECT_GT(a.sigma_out(0), a.sigma_out(1));
  EXPECT_EQ(a.sigma_out(2), 0.0);
}

TEST(VonNeumann, Examples) {
  SplitMix64 rng(7);
  const DenseMatrix A = random_matrix(rng, 5, 3);
  const auto [t, b] = von_neumann_gap(A, A);
  EXPECT_NEAR(t, b, 1e-12 * b);
  const auto [t2, b2] = von_neumann_gap(DenseMatrix::Identity(2, 2), DenseMatrix(-DenseMatrix::Identity(2, 2)));
  EXPECT_NEAR(t2, -2.0, 1e-14);
  EXPECT_NEAR(b2, 2.0, 1e-14);
  EXPECT_THROW(von_neumann_gap(A, DenseMatrix::Zero(3, 5)), DimensionMismatch);
}

TEST(VonNeumann, RandomPairs) {
  SplitMix64 rng(8);
  for (int t = 0; t < 200; ++t) {
    const DenseMatrix A = random_matrix(rng, 6, 4);
    const DenseMatrix B = random_matrix(rng, 6, 4);
    const auto [tr, bound] = von_neumann_gap(A, B);
    EXPECT_LE(tr, bound + 1e-9);
  }
}
