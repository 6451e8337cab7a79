#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"
#include "wsnm/bench.hpp"

using namespace wsnm;

namespace {

SyntheticSpec spec(int m, double pr, double pe, std::uint64_t seed) {
  SyntheticSpec s;
  s.m = m;
  s.rank_fraction = pr;
  s.corruption_fraction = pe;
  s.seed = seed;
  return s;
}

ForegroundMask mask_from(int w, int h, std::initializer_list<std::pair<int, int>> on) {
  ForegroundMask m(w, h);
  for (auto [r, c] : on) m.pixels(r, c) = 1;
  return m;
}

}  // namespace

TEST(Generator, ExactCorruptionCountAndRange) {
  const auto d = gen_lowrank_sparse(spec(50, 0.1, 0.07, 1));
  EXPECT_EQ((d.E.array() != 0.0).count(), std::lround(50 * 50 * 0.07));
  EXPECT_LE(d.E.cwiseAbs().maxCoeff(), 50.0);
  EXPECT_TRUE(d.Y.isApprox(d.X + d.E));
  EXPECT_EQ(estimate_rank(d.X), 5);
}

TEST(Generator, ZeroCorruptionGivesYEqualX) {
  const auto d = gen_lowrank_sparse(spec(30, 0.1, 0.0, 2));
  EXPECT_TRUE((d.Y.array() == d.X.array()).all());
}

TEST(Generator, FullScaleRank) {
  const auto d = gen_lowrank_sparse(spec(300, 0.05, 0.05, 3));
  EXPECT_EQ(estimate_rank(d.X), 15);
}

TEST(Generator, DeterministicPerSeed) {
  const auto a = gen_lowrank_sparse(spec(40, 0.1, 0.1, 9));
  const auto b = gen_lowrank_sparse(spec(40, 0.1, 0.1, 9));
  const auto c = gen_lowrank_sparse(spec(40, 0.1, 0.1, 10));
  EXPECT_TRUE((a.Y.array() == b.Y.array()).all());
  EXPECT_TRUE((a.E.array() == b.E.array()).all());
  EXPECT_FALSE((a.Y.array() == c.Y.array()).all());
}

TEST(Generator, RejectsBadSpecs) {
  EXPECT_THROW(gen_lowrank_sparse(spec(10, 1.0, 0.1, 0)), DomainError);
  EXPECT_THROW(gen_lowrank_sparse(spec(10, 0.01, 0.1, 0)), DomainError);
  EXPECT_THROW(gen_lowrank_sparse(spec(10, 0.2, 1.0, 0)), DomainError);
  EXPECT_THROW(gen_lowrank_sparse(spec(0, 0.2, 0.1, 0)), DomainError);
}

TEST(RelativeErrorMetric, Examples) {
  DenseMatrix X = DenseMatrix::Identity(3, 3);
  const auto exact = log_relative_error(X, X);
  EXPECT_EQ(exact.linear, 0.0);
  EXPECT_TRUE(std::isinf(exact.log) && exact.log < 0);
  const auto zero = log_relative_error(DenseMatrix::Zero(3, 3), X);
  EXPECT_DOUBLE_EQ(zero.linear, 1.0);
  EXPECT_DOUBLE_EQ(zero.log, 0.0);
  EXPECT_THROW(log_relative_error(X, DenseMatrix::Zero(3, 3)), DomainError);
  EXPECT_THROW(log_relative_error(X, DenseMatrix::Identity(2, 2)), DimensionMismatch);
  double prev = -INFINITY;
  for (double e = 0.01; e < 1; e += 0.1) {
    const double l = log_relative_error(X * (1 + e), X).log;
    EXPECT_GT(l, prev);
    prev = l;
  }
}

TEST(Methods, NamesRoundTrip) {
  EXPECT_EQ(MethodSpec::nnm().name(), "nnm");
  EXPECT_EQ(MethodSpec::wsnm(0.7).name(), "wsnm_p0.7");
  EXPECT_EQ(parse_method("wsnm").name(), "wsnm_p0.7");
  EXPECT_EQ(parse_method("wsnm_p0.4").config.p, 0.4);
  EXPECT_EQ(parse_method("nnm").kind, MethodSpec::Kind::kNnm);
  EXPECT_THROW(parse_method("svt"), DomainError);
  EXPECT_THROW(parse_method("wsnm_p2"), DomainError);
}

TEST(FractionGrid, IncludesEndpoint) {
  const auto g = fraction_grid(0.05, 0.4, 0.05);
  ASSERT_EQ(g.size(), 8u);
  EXPECT_DOUBLE_EQ(g.front(), 0.05);
  EXPECT_DOUBLE_EQ(g.back(), 0.4);
  EXPECT_EQ(fraction_grid(0.01, 0.4, 0.01).size(), 40u);
  EXPECT_THROW(fraction_grid(0.1, 0.05, 0.01), DomainError);
  EXPECT_THROW(fraction_grid(0.1, 0.2, 0.0), DomainError);
}

TEST(Sweep, ParallelMatchesSequentialAndCsvSchema) {
  SweepOptions opts;
  opts.m = 40;
  opts.rank_fractions = {0.05, 0.2};
  opts.corruption_fractions = {0.05, 0.3};
  opts.repeats = 2;
  opts.methods = {MethodSpec::nnm(), MethodSpec::wsnm(0.7)};
  const auto seq = run_phase_sweep(opts);
  opts.threads = 3;
  const auto par = run_phase_sweep(opts);
  std::ostringstream a, b;
  seq.write_csv(a, false);
  par.write_csv(b, false);
  EXPECT_EQ(a.str(), b.str());
  ASSERT_EQ(seq.runs.size(), 16u);
  ASSERT_EQ(seq.cells.size(), 8u);
  const std::string csv = a.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "p_r,p_e,method,repeat,rel_err,log_rel_err,est_rank,iters,seconds");
  const auto* easy = seq.find(0.05, 0.05, "wsnm_p0.7");
  ASSERT_NE(easy, nullptr);
  EXPECT_TRUE(easy->success);
  EXPECT_TRUE(seq.find(0.05, 0.05, "nnm")->success);
  EXPECT_EQ(seq.find(0.5, 0.05, "nnm"), nullptr);
  EXPECT_GE(seq.success_count("nnm"), 1);
}

TEST(Sweep, CsvUsesNineSignificantDigits) {
  SweepReport r;
  r.runs.push_back({0.05, 0.1, "nnm", 0, 1.0 / 3.0, std::log(1.0 / 3.0), 7, 12, 0.5, true, ""});
  std::ostringstream out;
  r.write_csv(out, true);
  EXPECT_NE(out.str().find("0.05,0.1,nnm,0,0.333333333,-1.09861229,7,12,0.5"), std::string::npos) << out.str();
}

TEST(Table, RowsFollowRanks) {
  const auto rep = run_table(60, {2, 8}, 0.05, 1, {MethodSpec::wsnm(0.7)}, 5);
  ASSERT_EQ(rep.cells.size(), 2u);
  EXPECT_DOUBLE_EQ(rep.cells[0].p_r, 2.0 / 60.0);
  EXPECT_DOUBLE_EQ(rep.cells[1].p_r, 8.0 / 60.0);
  EXPECT_DOUBLE_EQ(rep.cells[0].mean_rank, 2.0);
  EXPECT_DOUBLE_EQ(rep.cells[1].mean_rank, 8.0);
  EXPECT_TRUE(rep.cells[1].success);
}

TEST(Video, MatrixRoundTrip) {
  GrayImage a(3, 2);
  GrayImage b(3, 2);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) {
      a(r, c) = r * 3 + c;
      b(r, c) = 10 + r * 3 + c;
    }
  const DenseMatrix M = video_to_matrix({a, b});
  ASSERT_EQ(M.rows(), 6);
  ASSERT_EQ(M.cols(), 2);
  EXPECT_EQ(M(1, 0), 1.0);
  EXPECT_EQ(M(3, 1), 13.0);
  EXPECT_TRUE((matrix_column_to_image(M, 1, 3, 2).pixels() == b.pixels()).all());
  EXPECT_EQ(estimate_rank(video_to_matrix({a, a})), 1);
  EXPECT_THROW(video_to_matrix({}), DomainError);
  EXPECT_THROW(video_to_matrix({a, GrayImage(2, 3)}), DimensionMismatch);
}

TEST(Foreground, SimilarityExamples) {
  const auto a = mask_from(4, 4, {{0, 0}, {1, 1}});
  const auto b = mask_from(4, 4, {{2, 2}});
  const auto c = mask_from(4, 4, {{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  EXPECT_EQ(foreground_similarity(a, a), 1.0);
  EXPECT_EQ(foreground_similarity(a, b), 0.0);
  EXPECT_EQ(foreground_similarity(a, c), 0.5);
  EXPECT_EQ(foreground_similarity(c, a), 0.5);
  EXPECT_EQ(foreground_similarity(ForegroundMask(4, 4), ForegroundMask(4, 4)), 1.0);
  EXPECT_THROW(foreground_similarity(a, ForegroundMask(3, 4)), DimensionMismatch);
}

TEST(Foreground, BinarizeExamples) {
  const auto none = binarize_foreground(DenseMatrix::Zero(12, 3), 4, 3);
  ASSERT_EQ(none.size(), 3u);
  for (const auto& m : none) EXPECT_EQ(m.count(), 0);
  SplitMix64 rng(4);
  DenseMatrix E = 0.01 * wsnm::testing::random_matrix(rng, 12, 3);
  E(5, 1) = 100.0;
  const auto spike = binarize_foreground(E, 4, 3);
  EXPECT_EQ(spike[0].count() + spike[1].count() + spike[2].count(), 1);
  EXPECT_EQ(spike[1].pixels(1, 1), 1);
}

TEST(Foreground, MovingBoxSeparates) {
  const auto seq = gen_moving_box(40, 30, 24, 8, 3);
  const DenseMatrix Y = video_to_matrix(seq.frames);
  RpcaConfig cfg;
  cfg.C = kBackgroundWeightScale;
  for (const auto& res : {wsnm_rpca(Y, cfg), nnm_rpca(Y, cfg)}) {
    EXPECT_EQ(res.estimated_rank, 1);
    const auto masks = binarize_foreground(res.E, 40, 30);
    for (std::size_t j = 0; j < masks.size(); ++j) {
      EXPECT_GE(foreground_similarity(masks[j], seq.truth[j]), 0.7) << "frame " << j;
      const GrayImage bg = matrix_column_to_image(res.X, static_cast<Eigen::Index>(j), 40, 30);
      EXPECT_LE((bg.pixels() - seq.background.pixels()).abs().maxCoeff(), 1e-3) << "frame " << j;
    }
  }
}
