#include <gtest/gtest.h>

#include <random>

#include "mpinfer/experiments.hpp"
#include "mpinfer/mpcc.hpp"
#include "support/cases.hpp"

using namespace mpinfer;

namespace {

double sim1_stat(const DenseVector& xbar, const DenseMatrix& cov, double n, double theta) {
  const Sim1Sample s = sim1_instance(xbar, cov, n);
  return profile_statistic(build_lp_system(s.lp, s.est), s.est, DenseVector{theta}).statistic;
}

}  // namespace

TEST(Mpcc, MaxOfMeansHandValues) {
  const DenseMatrix eye = DenseMatrix::identity(2);
  EXPECT_NEAR(sim1_stat({5.0, 3.0}, eye, 100.0, 4.5), 25.0, 1e-8);
  EXPECT_NEAR(sim1_stat({5.0, 3.0}, eye, 100.0, 5.1), 1.0, 1e-8);
  EXPECT_NEAR(sim1_stat({5.0, 3.0}, eye, 100.0, 5.0), 0.0, 1e-10);
  // both means tie: either piece reaches zero
  EXPECT_NEAR(sim1_stat({4.0, 4.0}, eye, 50.0, 4.0), 0.0, 1e-10);
}

TEST(Mpcc, MaxOfMeansMatchesClosedForm) {
  const DenseMatrix covs[] = {DenseMatrix::identity(2), DenseMatrix{{3, 0}, {0, 1}}, DenseMatrix{{3, 1.5}, {1.5, 1}}};
  const DenseVector means[] = {{5.0, 3.0}, {5.0, 4.9}, {4.8, 5.1}};
  for (const auto& cov : covs)
    for (const auto& xbar : means)
      for (double theta = 4.0; theta <= 6.0; theta += 0.125) {
        const double want = cases::sim1_closed_form(xbar, cov, 200.0, theta);
        EXPECT_NEAR(sim1_stat(xbar, cov, 200.0, theta), want, 1e-7 * std::max(1.0, want)) << "theta " << theta;
      }
}

TEST(Mpcc, TwoPairSystemsMatchBruteForce) {
  std::mt19937_64 gen(31337);
  for (int t = 0; t < 20; ++t) {
    const cases::TwoPairCase tc = cases::random_two_pair(gen);
    const cases::TwoPairComparison cmp = cases::compare_two_pair(tc);
    EXPECT_TRUE(cmp.ok) << "case " << t << ": library " << cmp.library << " brute force " << cmp.brute;
  }
}

TEST(Mpcc, StatisticIsZeroAtNoiselessTruth) {
  const SimDesign d = make_design(SimDesignId::Sim2);
  const DenseVector point = stack_coefficients(d.lp);
  const EstimatedCoefficients est{point, DenseMatrix::identity(point.size()), 100.0,
                                  std::vector<bool>(point.size(), true)};
  const KktSystem sys = build_lp_system(d.lp, est);
  const ProfileResult pr = profile_statistic(sys, est, d.theta0);
  EXPECT_NEAR(pr.statistic, 0.0, 1e-12);
  EXPECT_NEAR(pr.lambda_star[0], 5.0 / 3.0, 1e-8);
  EXPECT_NEAR(pr.lambda_star[1], 4.0 / 3.0, 1e-8);
}

TEST(Mpcc, ProductionLpStatisticGrowsAwayFromTruth) {
  const SimDesign d = make_design(SimDesignId::Sim2);
  const DenseVector point = stack_coefficients(d.lp);
  const EstimatedCoefficients est{point, DenseMatrix::identity(point.size()), 100.0,
                                  std::vector<bool>(point.size(), true)};
  const KktSystem sys = build_lp_system(d.lp, est);
  double prev = 0.0;
  for (double step : {0.05, 0.1, 0.2, 0.4}) {
    const double f = profile_statistic(sys, est, DenseVector{2.0 + step, 1.0}).statistic;
    EXPECT_GT(f, prev);
    prev = f;
  }
}

TEST(Mpcc, PerturbedCostMatchesBruteForceOnProductionLp) {
  // Same shape as the production LP but theta free, so every pair is enumerated.
  const LpProblem p{DenseMatrix{{1, 2}, {1, -1}}, DenseVector{4, 1}, DenseVector{3.2, 1.9}, false};
  const DenseVector point = stack_coefficients(p);
  DenseMatrix v = DenseMatrix::identity(point.size());
  v(6, 6) = 2.0;
  const EstimatedCoefficients est{point, v, 100.0, std::vector<bool>(point.size(), true)};
  const KktSystem sys = build_lp_system(p, est);
  for (const DenseVector& theta : {DenseVector{2.0, 1.0}, DenseVector{2.1, 0.9}, DenseVector{1.8, 1.05}}) {
    const ProfileResult pr = profile_statistic(sys, est, theta);
    const oracle::LpSystem os{oracle::to_eigen(p.A), oracle::to_eigen(p.b), oracle::to_eigen(p.c), oracle::to_eigen(theta),
                              oracle::to_eigen(v), 100.0};
    const oracle::BruteResult br = oracle::lp_brute_force(os, 6.0);
    EXPECT_NEAR(pr.statistic, br.value, 1e-3 * std::max(1.0, br.value));
  }
}

TEST(Mpcc, FrozenPieceScalesQuadratically) {
  FrozenPiece fp;
  fp.M = DenseMatrix{{1, 0}, {0, 1}, {1, 1}};
  fp.h = {-1.0, 0.5, 2.0};
  fp.W = DenseMatrix{{2, 0, 0}, {0, 1, 0.2}, {0, 0.2, 1}};
  fp.E = DenseMatrix{{1, -1}};
  fp.e = {0.3};
  fp.sign = {true, false};
  const FrozenSolution base = solve_frozen_piece(fp);
  ASSERT_TRUE(base.feasible);
  for (double t : {0.5, 3.0, 10.0}) {
    FrozenPiece scaled = fp;
    scaled.h = t * fp.h;
    scaled.e = t * fp.e;
    const FrozenSolution s = solve_frozen_piece(scaled);
    ASSERT_TRUE(s.feasible);
    EXPECT_NEAR(s.value, t * t * base.value, 1e-9 * std::max(1.0, t * t * base.value));
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(s.y[i], t * base.y[i], 1e-9 * std::max(1.0, t));
  }
}

TEST(Mpcc, FrozenPieceInfeasibleEquality) {
  FrozenPiece fp;
  fp.M = DenseMatrix{{1}};
  fp.h = {0.0};
  fp.W = DenseMatrix{{1}};
  fp.E = DenseMatrix{{1}};
  fp.e = {-1.0};
  fp.sign = {true};
  EXPECT_FALSE(solve_frozen_piece(fp).feasible);
}

TEST(Mpcc, TooManyPairsIsRejected) {
  const std::size_t m = 21;
  LpProblem p{DenseMatrix(m, 1), DenseVector(m, 1.0), DenseVector{1.0}, false};
  for (std::size_t i = 0; i < m; ++i) p.A(i, 0) = 1.0;
  const DenseVector point = stack_coefficients(p);
  const EstimatedCoefficients est{point, DenseMatrix::identity(point.size()), 10.0,
                                  std::vector<bool>(point.size(), true)};
  const KktSystem sys = build_lp_system(p, est);
  EXPECT_EQ(enumerated_pair_count(sys), m);
  EXPECT_THROW(profile_statistic(sys, est, DenseVector{0.5}), PieceLimitExceeded);
}

TEST(Mpcc, DeterministicRowsWithoutSolutionThrow) {
  // Only b is estimated, so the dual row -lambda1 - lambda2 - 1 = 0 is
  // enforced exactly and has no nonnegative solution.
  LpProblem p{DenseMatrix{{-1}, {-1}}, DenseVector{-5, -3}, DenseVector{1}, false};
  const DenseVector point = stack_coefficients(p);
  DenseMatrix v(point.size(), point.size());
  std::vector<bool> mask(point.size(), false);
  for (std::size_t i = 2; i < 4; ++i) {
    v(i, i) = 1.0;
    mask[i] = true;
  }
  const EstimatedCoefficients est{point, v, 10.0, mask};
  const KktSystem sys = build_lp_system(p, est);
  EXPECT_THROW(profile_statistic(sys, est, DenseVector{5.0}), NoFeasiblePiece);
}

TEST(Mpcc, NegativeThetaUnderSignConstraintIsRejected) {
  const SimDesign d = make_design(SimDesignId::Sim2);
  const DenseVector point = stack_coefficients(d.lp);
  const EstimatedCoefficients est{point, DenseMatrix::identity(point.size()), 100.0,
                                  std::vector<bool>(point.size(), true)};
  const KktSystem sys = build_lp_system(d.lp, est);
  EXPECT_THROW(profile_statistic(sys, est, DenseVector{-0.5, 1.0}), PreconditionError);
}

TEST(Mpcc, DegenerateWeightPolicy) {
  // With zero covariance the statistic is 0 on an exact fit and infinite otherwise.
  const Sim1Sample s = sim1_instance(DenseVector{5.0, 3.0}, DenseMatrix(2, 2), 100.0);
  const KktSystem sys = build_lp_system(s.lp, s.est);
  EXPECT_EQ(profile_statistic(sys, s.est, DenseVector{5.0}).statistic, 0.0);
  EXPECT_TRUE(std::isinf(profile_statistic(sys, s.est, DenseVector{5.2}).statistic));
}
