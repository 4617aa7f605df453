// Spectral initializations, gradient iterations and alternating minimization.

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "lrpr/algorithms.hpp"
#include "lrpr/errors.hpp"
#include "lrpr/metrics.hpp"
#include "test_support.hpp"

namespace lrpr {
namespace {

using testing::random_basis;
using testing::random_matrix;
using testing::random_vector;

RealVec values(std::initializer_list<double> v) {
  RealVec out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// ---------------------------------------------------------------------------
// Truncated spectral matrix

TEST(TruncationWeights, ConstantColumnsKeepEverything) {
  const RealMat y = RealMat::Constant(7, 3, 2.5);
  EXPECT_EQ(truncation_weights(y), y);
}

TEST(TruncationWeights, OutlierAboveNineTimesTheMeanIsDropped) {
  RealMat y = RealMat::Ones(10, 1);
  y(0, 0) = 100.0;  // column mean 10.9, cut-off 98.1
  const RealMat w = truncation_weights(y);
  EXPECT_EQ(w(0, 0), 0.0);
  EXPECT_EQ(w.bottomRows(9), y.bottomRows(9));
  y(0, 0) = 98.0;  // mean 10.7, cut-off 96.3
  EXPECT_EQ(truncation_weights(y)(0, 0), 0.0);
  y(0, 0) = 90.0;  // mean 9.9, cut-off 89.1
  EXPECT_EQ(truncation_weights(y)(0, 0), 0.0);
  y(0, 0) = 80.0;  // mean 8.9, cut-off 80.1
  EXPECT_EQ(truncation_weights(y)(0, 0), 80.0);
}

TEST(TruncationWeights, NegativeNoisyEntriesKeepTheirSign) {
  RealMat y(4, 1);
  y << -0.5, 1.0, 2.0, 0.3;
  EXPECT_EQ(truncation_weights(y), y);
}

TEST(BuildYU, MatchesExhaustiveRecomputation) {
  const Index n = 5, m = 9, q = 4;
  const auto ens = testing::gaussian<cplx>(n, m, q, 21);
  const Mat<cplx> x = random_matrix<cplx>(n, q, 22);
  RealMat y = measure(*ens, x, 0.0, 0).y;
  y(3, 1) = 50.0 * y.col(1).maxCoeff();  // force one truncated term

  Mat<cplx> expected = Mat<cplx>::Zero(n, n);
  for (Index k = 0; k < q; ++k) {
    const double cut = 9.0 * y.col(k).mean();
    const Mat<cplx>& a = *ens->dense_rows(k);
    for (Index i = 0; i < m; ++i) {
      if (y(i, k) > cut) continue;
      const Vec<cplx> ai = a.row(i).adjoint();
      expected += y(i, k) * ai * ai.adjoint();
    }
  }
  expected /= double(m * q);

  const auto dense = build_YU(*ens, y);
  ASSERT_TRUE(dense.dense);
  EXPECT_LE((*dense.dense - expected).norm(), 1e-12 * expected.norm());

  const auto op = build_YU(*ens, y, 0);
  EXPECT_FALSE(op.dense);
  const Mat<cplx> probe = random_matrix<cplx>(n, 3, 23);
  EXPECT_LE((op.apply(probe) - expected * probe).norm(), 1e-12 * (expected * probe).norm());
}

TEST(BuildYU, SharedVectorsMatchPerColumnSum) {
  const auto shared = testing::gaussian<double>(6, 12, 5, 31, Sharing::Shared);
  std::vector<RealMat> blocks(5, *shared->dense_rows(0));
  const auto copies = testing::ensemble_from<double>(blocks);
  const RealMat y = measure(*shared, random_matrix<double>(6, 5, 32), 0.0, 0).y;
  EXPECT_LE((*build_YU(*shared, y).dense - *build_YU(*copies, y).dense).norm(), 1e-12);
}

TEST(BuildYU, TopEigenvectorRecoversRankOneSubspace) {
  const GroundTruth gt = gen_low_rank(20, 1000, 1, 5);
  const auto ens = testing::gaussian<double>(20, 200, 1000, 6);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  const EigPair<double> e = top_eigvecs_dense(*build_YU(*ens, y).dense, 1);
  EXPECT_LE(subspace_error<double>(e.vectors, gt.U), 0.05);
}

TEST(BuildYU, EmptyMeasurementsAreRejected) {
  const auto ens = testing::gaussian<double>(4, 3, 2, 1);
  EXPECT_THROW(build_YU(*ens, RealMat(0, 0)), ConfigurationError);
  EXPECT_THROW(build_YU(*ens, RealMat::Ones(4, 2)), DimensionError);
}

// ---------------------------------------------------------------------------
// Rank rules

TEST(RankGap, LargestGapAndTieBreak) {
  EXPECT_EQ(estimate_rank_gap(values({5, 4.9, 0.1, 0.05})), 2);
  EXPECT_EQ(estimate_rank_gap(values({4, 2, 0})), 1);
  EXPECT_THROW(estimate_rank_gap(values({1})), ConfigurationError);
}

TEST(RankThreshold, CountsQualifyingIndices) {
  auto r = estimate_rank_threshold(values({1.0, 0.9, 0.1, 0.1}), 1.0);
  EXPECT_EQ(r.rank, 2);
  EXPECT_FALSE(r.no_signal);
  r = estimate_rank_threshold(values({0.6, 0.35, 0.35}), 1.0);
  EXPECT_EQ(r.rank, 1);
  r = estimate_rank_threshold(values({0.4, 0.4, 0.4}), 1.0);
  EXPECT_EQ(r.rank, 0);
  EXPECT_TRUE(r.no_signal);
  EXPECT_THROW(estimate_rank_threshold(values({1, 0}), 0.0), ConfigurationError);
  EXPECT_THROW(estimate_rank_threshold(values({1, 0}), -1.0), ConfigurationError);
}

TEST(RankThreshold, NoSignalPropagatesFromInit) {
  const GroundTruth gt = gen_low_rank(10, 20, 2, 3);
  const auto ens = testing::gaussian<double>(10, 40, 20, 4);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  EXPECT_THROW(lrpr_init(*ens, y, RankRule::threshold(1e6)), NoSignalError);
}

// ---------------------------------------------------------------------------
// LRPR initialization

TEST(LrprInit, RecoversTheSubspaceWithEnoughMeasurements) {
  const GroundTruth gt = gen_low_rank(30, 300, 2, 8);
  const auto ens = testing::gaussian<double>(30, 60, 300, 9);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  // The threshold rule needs the noise spread of the spectrum below a quarter
  // of the smallest signal eigenvalue, which takes about 5x more rows here.
  const auto wide = testing::gaussian<double>(30, 300, 300, 10);
  const RealMat y_wide = measure(*wide, gt, 0.0, 0).y;
  for (const RankRule& rule : {RankRule::known(2), RankRule::gap(), RankRule::threshold(gt.min_eigenvalue())}) {
    const bool thr = rule.mode == RankMode::Threshold;
    const Estimate<double> est = lrpr_init(thr ? *wide : *ens, thr ? y_wide : y, rule);
    EXPECT_EQ(est.r_hat, 2);
    EXPECT_LT(subspace_error<double>(est.U_hat, gt.U), 0.3);
    EXPECT_LT(norm_err<double>(gt.X, est.X_hat), 0.15);
    EXPECT_LE((est.U_hat.transpose() * est.U_hat - RealMat::Identity(2, 2)).norm(), 1e-10);
    EXPECT_LE((est.X_hat - est.U_hat * est.B_hat).norm(), 1e-10 * est.X_hat.norm());
    EXPECT_EQ(est.rank_estimated, rule.mode != RankMode::Known);
  }
}

TEST(LrprInit, ZeroSignalIsDegenerateFixedPoint) {
  const auto ens = testing::gaussian<cplx>(8, 16, 5, 2);
  const Estimate<cplx> est = lrpr_init(*ens, RealMat::Zero(16, 5), RankRule::known(2));
  EXPECT_TRUE(est.degenerate);
  EXPECT_TRUE(est.X_hat.isZero(0.0));
  EXPECT_TRUE(est.B_hat.isZero(0.0));
}

TEST(LrprInit, ScaleEquivariance) {
  const GroundTruth gt = gen_low_rank(15, 40, 2, 12);
  const auto ens = testing::gaussian<double>(15, 30, 40, 13);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  const double s = 3.0;
  const Estimate<double> base = lrpr_init(*ens, y, RankRule::known(2));
  const Estimate<double> scaled = lrpr_init(*ens, RealMat(s * s * y), RankRule::known(2));
  EXPECT_LE(subspace_error<double>(scaled.U_hat, base.U_hat), 1e-8);
  EXPECT_LE(column_dists<double>(RealMat(s * base.X_hat), scaled.X_hat).maxCoeff(), 1e-8 * s);
  EXPECT_NEAR(norm_err<double>(RealMat(s * gt.X), scaled.X_hat), norm_err<double>(gt.X, base.X_hat), 1e-10);
}

TEST(LrprInit, PhaseInvarianceThroughMeasurements) {
  const GroundTruth gt = gen_low_rank(12, 30, 2, 14);
  const auto ens = testing::gaussian<cplx>(12, 30, 30, 15);
  const Mat<cplx> x = gt.signal<cplx>();
  Mat<cplx> rotated = x;
  for (Index k = 0; k < 30; ++k) rotated.col(k) *= std::polar(1.0, 0.37 * double(k));
  const RealMat y = measure(*ens, x, 0.0, 0).y;
  const RealMat y_rot = measure(*ens, rotated, 0.0, 0).y;
  EXPECT_LE((y - y_rot).cwiseAbs().maxCoeff(), 1e-12 * y.cwiseAbs().maxCoeff());
  const Estimate<cplx> est = lrpr_init(*ens, y, RankRule::known(2));
  EXPECT_NEAR(norm_err<cplx>(x, est.X_hat), norm_err<cplx>(rotated, est.X_hat), 1e-12);
  const Estimate<cplx> again = lrpr_init(*ens, y, RankRule::known(2));
  EXPECT_EQ(est.X_hat, again.X_hat);
}

TEST(LrprInit, PartitionedUsesSharedFreshRows) {
  const GroundTruth gt = gen_low_rank(20, 200, 2, 16);
  EnsembleSpec spec;
  spec.kind = EnsembleKind::GaussianReal;
  spec.n = 20;
  spec.m = 40;
  spec.q = 200;
  spec.fresh_rows = 60;
  spec.seed = 17;
  const auto ens = gen_ensemble<double>(spec);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  const auto parts = split_measurements(ens, y, 40, 60);
  const Estimate<double> est = lrpr_init(*parts.init.ens, parts.init.y, RankRule::known(2), {}, &parts.fresh);
  EXPECT_LT(norm_err<double>(gt.X, est.X_hat), 0.2);

  // Fresh rows drawn per column break the model.
  MeasurementPart<double> private_rows{parts.init.y, parts.init.ens};
  EXPECT_THROW(lrpr_init(*parts.init.ens, parts.init.y, RankRule::known(2), {}, &private_rows),
               PartitionError);
}

TEST(LrprInit, SharedVectorsFailWherePerColumnSucceeds) {
  double shared_err = 0.0, per_column_err = 0.0;
  const GroundTruth gt = gen_low_rank(100, 100, 2, 18);
  for (std::uint64_t t = 0; t < 3; ++t) {
    const auto per = testing::gaussian<double>(100, 100, 100, 100 + t);
    const auto same = testing::gaussian<double>(100, 100, 100, 200 + t, Sharing::Shared);
    per_column_err += norm_err<double>(gt.X, lrpr_init(*per, measure(*per, gt, 0.0, 0).y, RankRule::known(2)).X_hat);
    shared_err += norm_err<double>(gt.X, lrpr_init(*same, measure(*same, gt, 0.0, 0).y, RankRule::known(2)).X_hat);
  }
  EXPECT_LE(per_column_err / 3.0, 0.25);
  EXPECT_GE(shared_err / 3.0, 0.9);
}

// ---------------------------------------------------------------------------
// Column-wise initialization

TEST(TwfInit, AlignsWithCoordinateSignal) {
  const Index n = 8;
  const auto ens = testing::gaussian<double>(n, 20000, 1, 40);
  RealMat x = RealMat::Zero(n, 1);
  x(0, 0) = 2.5;
  const RealMat y = measure(*ens, x, 0.0, 0).y;
  const RealVec est = twf_init<double>(*ens, 0, y.col(0));
  EXPECT_LT(phase_dist<double>(est, x.col(0)) / 2.5, 0.05);
  EXPECT_NEAR(est.norm(), 2.5, 0.05);
}

TEST(TwfInit, SingleMeasurementGivesMultipleOfItsVector) {
  const auto ens = testing::gaussian<cplx>(6, 1, 1, 41);
  const Mat<cplx> x = random_matrix<cplx>(6, 1, 42);
  const RealMat y = measure(*ens, x, 0.0, 0).y;
  const Vec<cplx> est = twf_init<cplx>(*ens, 0, y.col(0));
  const Vec<cplx> a = ens->dense_rows(0)->row(0).adjoint();
  EXPECT_LE(phase_dist<cplx>(Vec<cplx>(est / est.norm()), Vec<cplx>(a / a.norm())), 1e-10);
}

TEST(TwfInit, ZeroColumnIsDegenerate) {
  const auto ens = testing::gaussian<double>(5, 10, 2, 43);
  ColumnInit info;
  const RealVec est = twf_init<double>(*ens, 1, RealVec::Zero(10), {}, &info);
  EXPECT_TRUE(info.degenerate);
  EXPECT_TRUE(est.isZero(0.0));
}

TEST(TwfInit, DenseAndPowerPathsAgree) {
  const GroundTruth gt = gen_low_rank(10, 3, 2, 44);
  const auto ens = testing::gaussian<cplx>(10, 80, 3, 45);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  SpectralOptions power;
  power.dense_threshold = 0;
  power.power_iters = 500;
  const Estimate<cplx> a = twf_init_all(*ens, y);
  const Estimate<cplx> b = twf_init_all(*ens, y, power);
  EXPECT_LE(column_dists<cplx>(a.X_hat, b.X_hat).maxCoeff(), 1e-6 * a.X_hat.norm());
}

TEST(TwfProjInit, IsTheBestRankRFitOfTheColumnwiseInit) {
  const GroundTruth gt = gen_low_rank(12, 30, 2, 46);
  const auto ens = testing::gaussian<double>(12, 24, 30, 47);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  const Estimate<double> columnwise = twf_init_all(*ens, y);
  const Estimate<double> proj = twfproj_init(*ens, y, 2);
  const RealMat oracle = rank_r_project(columnwise.X_hat, 2);
  EXPECT_LE((proj.X_hat - oracle).norm(), 1e-10 * oracle.norm());
  EXPECT_LE((proj.X_hat - proj.U_hat * proj.B_hat).norm(), 1e-10 * proj.X_hat.norm());
  const RealMat other = random_matrix<double>(12, 2, 48) * random_matrix<double>(2, 30, 49);
  EXPECT_LE((proj.X_hat - columnwise.X_hat).norm(), (other - columnwise.X_hat).norm());
  EXPECT_LE((rank_r_project(proj.X_hat, 2) - proj.X_hat).norm(), 1e-10 * proj.X_hat.norm());
}

// ---------------------------------------------------------------------------
// Gradient step

TEST(TwfStep, TruthIsAFixedPoint) {
  const auto ens = testing::gaussian<cplx>(7, 30, 1, 50);
  const Mat<cplx> x = random_matrix<cplx>(7, 1, 51);
  const RealMat y = measure(*ens, x, 0.0, 0).y;
  const Vec<cplx> out = twf_step<cplx>(*ens, 0, x.col(0), y.col(0), TwfParams{});
  EXPECT_LE((out - x.col(0)).norm(), 1e-12 * x.norm());
}

TEST(TwfStep, ZeroStepIsIdentity) {
  const auto ens = testing::gaussian<double>(7, 30, 1, 52);
  const RealVec x = random_vector<double>(7, 53);
  const RealMat y = RealMat::Ones(30, 1);
  TwfParams p;
  p.step = 0.0;
  EXPECT_EQ(twf_step<double>(*ens, 0, x, y.col(0), p), x);
}

TEST(TwfStep, MatchesDirectSummation) {
  const Index n = 4, m = 6;
  const auto ens = testing::gaussian<cplx>(n, m, 1, 54);
  const Mat<cplx>& a = *ens->dense_rows(0);
  const Vec<cplx> truth = random_vector<cplx>(n, 55);
  const Vec<cplx> x = truth + 0.4 * random_vector<cplx>(n, 56);
  const RealMat y = measure(*ens, Mat<cplx>(truth), 0.0, 0).y;

  for (EventRule rule : {EventRule::Intersection, EventRule::Union}) {
    TwfParams p;
    p.events = rule;
    p.alpha_h = 1.2;  // small enough that some terms fail the residual test
    std::vector<cplx> z(m);
    std::vector<double> res(m);
    double mean_abs = 0.0;
    for (Index i = 0; i < m; ++i) {
      z[i] = 0.0;
      for (Index j = 0; j < n; ++j) z[i] += a(i, j) * x(j);
      res[i] = y(i, 0) - std::norm(z[i]);
      mean_abs += std::abs(res[i]) / double(m);
    }
    Vec<cplx> expected = x;
    for (Index i = 0; i < m; ++i) {
      const double ratio = std::abs(z[i]) / x.norm();
      const bool e1 = ratio >= p.alpha_lb && ratio <= p.alpha_ub;
      const bool e2 = std::abs(res[i]) <= p.alpha_h * mean_abs * ratio;
      if (rule == EventRule::Intersection ? !(e1 && e2) : !(e1 || e2)) continue;
      const cplx coef = 2.0 * p.step / double(m) * res[i] / std::conj(z[i]);
      for (Index j = 0; j < n; ++j) expected(j) += coef * std::conj(a(i, j));
    }
    const Vec<cplx> out = twf_step<cplx>(*ens, 0, x, y.col(0), p);
    EXPECT_LE((out - expected).norm(), 1e-12 * x.norm());
  }
}

TEST(TwfStep, NonFiniteIterateIsRejected) {
  const auto ens = testing::gaussian<double>(3, 5, 1, 57);
  RealVec x = RealVec::Ones(3);
  x(1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(twf_step<double>(*ens, 0, x, RealVec::Ones(5), TwfParams{}), NumericalError);
}

TEST(TwfParams, Validation) {
  TwfParams p;
  EXPECT_NO_THROW(p.validate());
  p.alpha_lb = 6.0;
  EXPECT_THROW(p.validate(), ConfigurationError);
  p = TwfParams{};
  p.step = -1.0;
  EXPECT_THROW(p.validate(), ConfigurationError);
  EXPECT_EQ(parse_event_rule("union"), EventRule::Union);
  EXPECT_THROW(parse_event_rule("both"), ConfigurationError);
}

// ---------------------------------------------------------------------------
// Gradient iterations

struct SmallComplexProblem {
  GroundTruth gt;
  std::shared_ptr<const Ensemble<cplx>> ens;
  RealMat y;
  Mat<cplx> x;
};

SmallComplexProblem small_problem(Index n, Index q, Index m, std::uint64_t seed) {
  SmallComplexProblem p;
  p.gt = gen_low_rank(n, q, 2, seed);
  p.ens = testing::gaussian<cplx>(n, m, q, seed + 1);
  p.y = measure(*p.ens, p.gt, 0.0, 0).y;
  p.x = p.gt.signal<cplx>();
  return p;
}

TEST(RunLrprTwf, ZeroIterationsReturnTheInit) {
  const auto pr = small_problem(10, 8, 80, 60);
  TwfParams p;
  p.iterations = 0;
  const Estimate<cplx> est = run_lrpr_twf(*pr.ens, pr.y, p, InitKind::Lrpr, RankRule::known(2));
  const Estimate<cplx> init = lrpr_init(*pr.ens, pr.y, RankRule::known(2));
  EXPECT_EQ(est.X_hat, init.X_hat);
  EXPECT_TRUE(est.factored());
}

TEST(RunLrprTwf, ConvergesMonotonicallyWithManyMeasurements) {
  const auto pr = small_problem(20, 10, 160, 61);
  TwfParams p;
  p.iterations = 60;
  RunOptions<cplx> opts;
  opts.truth = &pr.x;
  const Estimate<cplx> est = run_lrpr_twf(*pr.ens, pr.y, p, InitKind::Lrpr, RankRule::known(2), opts);
  ASSERT_EQ(est.trace.size(), 61u);
  EXPECT_EQ(est.trace.front().iteration, 0);
  for (std::size_t t = 1; t < est.trace.size(); ++t) {
    EXPECT_LE(est.trace[t].norm_err, est.trace[t - 1].norm_err + 1e-12);
    EXPECT_GE(est.trace[t].elapsed_seconds, est.trace[t - 1].elapsed_seconds);
  }
  EXPECT_LT(est.trace.back().norm_err, 1e-8);
  EXPECT_NEAR(norm_err<cplx>(pr.x, est.X_hat), est.trace.back().norm_err, 1e-15);
}

TEST(RunLrprTwf, StopsOnceBelowTheTarget) {
  const auto pr = small_problem(20, 10, 160, 61);
  TwfParams p;
  RunOptions<cplx> opts;
  opts.truth = &pr.x;
  opts.stop_below = 1e-4;
  const Estimate<cplx> est = run_lrpr_twf(*pr.ens, pr.y, p, InitKind::Twf, RankRule::known(2), opts);
  ASSERT_LT(est.trace.size(), 101u);
  EXPECT_LT(est.trace.back().norm_err, 1e-4);
  EXPECT_GE(est.trace[est.trace.size() - 2].norm_err, 1e-4);
}

TEST(RunLrpr1, ZeroStepKeepsTheRankRInit) {
  const auto pr = small_problem(10, 12, 40, 62);
  TwfParams p;
  p.step = 0.0;
  p.iterations = 1;
  for (InitKind kind : {InitKind::Lrpr, InitKind::TwfProj}) {
    const Estimate<cplx> est = run_lrpr1(*pr.ens, pr.y, p, kind, RankRule::known(2));
    const Estimate<cplx> init =
        kind == InitKind::Lrpr ? lrpr_init(*pr.ens, pr.y, RankRule::known(2)) : twfproj_init(*pr.ens, pr.y, 2);
    EXPECT_LE((est.X_hat - rank_r_project(init.X_hat, 2)).norm(), 1e-10 * init.X_hat.norm());
    EXPECT_LE((est.X_hat - est.U_hat * est.B_hat).norm(), 1e-10 * est.X_hat.norm());
  }
  EXPECT_THROW(run_lrpr1(*pr.ens, pr.y, p, InitKind::Twf, RankRule::known(2)), ConfigurationError);
}

// ---------------------------------------------------------------------------
// Alternating minimization pieces

TEST(PhaseStep, RealSignsWithZeroRule) {
  RealMat a(3, 2);
  a << 2, 0, -3, 5, 0, 7;
  const auto ens = testing::ensemble_from<double>({a});
  const RealMat c = phase_step<double>(*ens, RealMat::Identity(2, 1), RealMat::Ones(1, 1));
  EXPECT_EQ(c, (RealMat(3, 1) << 1, -1, 1).finished());
}

TEST(PhaseStep, ComplexPhasesAreUnitModulus) {
  Mat<cplx> a(3, 1);
  a << cplx(3, 4), cplx(-1, 1), cplx(0, -2);
  const auto ens = testing::ensemble_from<cplx>({a});
  const Mat<cplx> c = phase_step<cplx>(*ens, Mat<cplx>::Ones(1, 1), Mat<cplx>::Ones(1, 1));
  for (Index i = 0; i < 3; ++i) {
    EXPECT_LE(std::abs(c(i, 0) - a(i, 0) / std::abs(a(i, 0))), 1e-15);
  }
  EXPECT_EQ(phase_of<cplx>(Vec<cplx>::Zero(2)), Vec<cplx>::Ones(2));
}

TEST(PhaseStep, TruePhasesRecoverLinearMeasurements) {
  const GroundTruth gt = gen_low_rank(6, 4, 2, 70);
  const auto ens = testing::gaussian<double>(6, 15, 4, 71);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  const RealMat c = phase_step<double>(*ens, gt.U, gt.B);
  for (Index k = 0; k < 4; ++k) {
    const RealVec linear = *ens->dense_rows(k) * gt.X.col(k);
    const RealVec rebuilt = c.col(k).cwiseProduct(y.col(k).cwiseSqrt());
    EXPECT_LE((rebuilt - linear).norm(), 1e-12 * linear.norm());
  }
}

TEST(LsUpdateU, TruePhasesAndCoefficientsRecoverTheBasis) {
  const GroundTruth gt = gen_low_rank(8, 20, 2, 72);
  const auto ens = testing::gaussian<double>(8, 6, 20, 73);  // mq = 120 >= nr = 16
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  const RealMat c = phase_step<double>(*ens, gt.U, gt.B);
  const RealMat u = ls_update_U<double>(*ens, c, y, gt.B);
  EXPECT_LE((u - gt.U).norm(), 1e-8);
  EXPECT_LE(subspace_error<double>(orthonormalize(u), gt.U), 1e-8);

  LsOptions iterative;
  iterative.dense_unknowns = 0;
  iterative.cgls_iters = 200;
  EXPECT_LE((ls_update_U<double>(*ens, c, y, gt.B, iterative) - gt.U).norm(), 1e-8);
}

TEST(LsUpdateU, SingleColumnSingleRankDenseOracle) {
  const auto ens = testing::gaussian<cplx>(5, 12, 1, 74);
  const Mat<cplx> b = (Mat<cplx>(1, 1) << cplx(0.7, -0.2)).finished();
  const Mat<cplx> c = random_matrix<cplx>(12, 1, 75).unaryExpr([](cplx v) { return v / std::abs(v); });
  const RealMat y = random_matrix<double>(12, 1, 76).cwiseAbs2();
  const Mat<cplx> design = *ens->dense_rows(0) * b(0, 0);
  const Vec<cplx> rhs = c.col(0).cwiseProduct(y.col(0).cwiseSqrt().cast<cplx>());
  const Vec<cplx> oracle = design.colPivHouseholderQr().solve(rhs);
  const Mat<cplx> u = ls_update_U<cplx>(*ens, c, y, b);
  EXPECT_LE((u.col(0) - oracle).norm(), 1e-10 * oracle.norm());
}

TEST(LsUpdateU, ZeroCoefficientsAreRankDeficient) {
  const auto ens = testing::gaussian<double>(4, 5, 3, 77);
  const RealMat c = RealMat::Ones(5, 3);
  try {
    ls_update_U<double>(*ens, c, RealMat::Ones(5, 3), RealMat::Zero(2, 3));
    FAIL() << "expected RankDeficiencyError";
  } catch (const RankDeficiencyError& e) {
    EXPECT_NE(std::string(e.what()).find("mq >= nr"), std::string::npos) << e.what();
  }
}

TEST(LsUpdateB, TrueBasisRecoversColumns) {
  const GroundTruth gt = gen_low_rank(9, 5, 2, 78);
  const auto ens = testing::gaussian<cplx>(9, 7, 5, 79);
  const Mat<cplx> x = gt.signal<cplx>();
  const Mat<cplx> u = gt.U.cast<cplx>();
  const RealMat y = measure(*ens, x, 0.0, 0).y;
  const Mat<cplx> c = phase_step<cplx>(*ens, u, Mat<cplx>(gt.B.cast<cplx>()));
  for (Index k = 0; k < 5; ++k) {
    const Vec<cplx> b = ls_update_b<cplx>(*ens, k, c.col(k), y.col(k), u);
    EXPECT_LE((u * b - x.col(k)).norm(), 1e-10 * x.col(k).norm());
  }
  EXPECT_TRUE(ls_update_b<cplx>(*ens, 0, c.col(0), RealVec::Zero(7), u).isZero(0.0));
}

TEST(LsUpdateB, ScalarCase) {
  RealMat a(1, 3);
  a << 0.5, -1.0, 2.0;
  const auto ens = testing::ensemble_from<double>({a});
  const RealMat u = RealVec((RealVec(3) << 0, 0, 1).finished());
  const RealVec b = ls_update_b<double>(*ens, 0, RealVec::Constant(1, -1.0), RealVec::Constant(1, 9.0), u);
  EXPECT_NEAR(b(0), -3.0 / 2.0, 1e-15);
  EXPECT_THROW(ls_update_b<double>(*ens, 0, RealVec::Ones(1), RealVec::Ones(1), RealMat::Identity(3, 2)),
               RankDeficiencyError);
}

TEST(AltMin, FrozenTruePhasesRecoverInOneRound) {
  const GroundTruth gt = gen_low_rank(10, 30, 2, 80);
  const auto ens = testing::gaussian<cplx>(10, 8, 30, 81);  // mq = 240 >= 2nr = 40
  const Mat<cplx> x = gt.signal<cplx>();
  const RealMat y = measure(*ens, x, 0.0, 0).y;
  const Mat<cplx> c = phase_step<cplx>(*ens, Mat<cplx>(gt.U.cast<cplx>()), Mat<cplx>(gt.B.cast<cplx>()));
  // Coefficients known only up to an invertible mixing.
  const Mat<cplx> mix = random_matrix<cplx>(2, 2, 82) + 2.0 * Mat<cplx>::Identity(2, 2);
  const Mat<cplx> u = orthonormalize<cplx>(ls_update_U<cplx>(*ens, c, y, Mat<cplx>(mix * gt.B.cast<cplx>())));
  Mat<cplx> xh(10, 30);
  for (Index k = 0; k < 30; ++k) xh.col(k) = u * ls_update_b<cplx>(*ens, k, c.col(k), y.col(k), u);
  EXPECT_LE(norm_err<cplx>(x, xh), 1e-8);
}

TEST(AltMin, TruthIsAFixedPointOfOneRound) {
  const GroundTruth gt = gen_low_rank(8, 12, 2, 83);
  const auto ens = testing::gaussian<double>(8, 10, 12, 84);
  const RealMat y = measure(*ens, gt, 0.0, 0).y;
  AltMinSolver<double> solver(*ens, y);
  RealMat u = gt.U, b = gt.B;
  solver.round(u, b);
  EXPECT_LE((u * b - gt.X).norm(), 1e-10 * gt.X.norm());
  EXPECT_LE((u.transpose() * u - RealMat::Identity(2, 2)).norm(), 1e-10);
}

TEST(RunLrpr2, ZeroRoundsEqualTheInit) {
  const auto pr = small_problem(10, 12, 30, 85);
  const Estimate<cplx> est = run_lrpr2(*pr.ens, pr.y, 0, RankRule::known(2));
  EXPECT_EQ(est.X_hat, lrpr_init(*pr.ens, pr.y, RankRule::known(2)).X_hat);
}

TEST(RunLrpr2, ConvergesAndStaysFactored) {
  const auto pr = small_problem(20, 60, 20, 86);
  RunOptions<cplx> opts;
  opts.truth = &pr.x;
  opts.stop_below = 1e-10;
  for (Index dense_unknowns : {Index(20000), Index(0)}) {
    opts.ls.dense_unknowns = dense_unknowns;
    const Estimate<cplx> est = run_lrpr2(*pr.ens, pr.y, 100, RankRule::known(2), opts);
    EXPECT_LT(est.trace.back().norm_err, 1e-10) << "dense_unknowns=" << dense_unknowns;
    EXPECT_LE((est.X_hat - est.U_hat * est.B_hat).norm(), 1e-10 * est.X_hat.norm());
    EXPECT_LE((est.U_hat.adjoint() * est.U_hat - Mat<cplx>::Identity(2, 2)).norm(), 1e-10);
  }
}

}  // namespace
}  // namespace lrpr
