#include <gtest/gtest.h>

#include <random>

#include "mpinfer/qp.hpp"
#include "support/oracles.hpp"

using namespace mpinfer;

namespace {

QpProblem box_qp(const DenseMatrix& q, const DenseVector& c) {
  QpProblem p;
  p.Q = q;
  p.c = c;
  return p;
}

}  // namespace

TEST(Qp, UnconstrainedMinimum) {
  const QpSolution s = solve_qp(box_qp(DenseMatrix{{2, 0}, {0, 4}}, DenseVector{-2, -4}));
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.theta[0], 1.0, 1e-12);
  EXPECT_NEAR(s.theta[1], 1.0, 1e-12);
  EXPECT_NEAR(s.objective, -3.0, 1e-12);
}

TEST(Qp, SimplexConstrainedMinimumVariance) {
  // min 1/2 theta'Q theta, 1'theta = 1, theta >= 0
  QpProblem p = box_qp(DenseMatrix{{1, 0}, {0, 3}}, DenseVector{0, 0});
  p.A_eq = DenseMatrix{{1, 1}};
  p.b_eq = {1};
  p.nonneg = true;
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.theta[0], 0.75, 1e-12);
  EXPECT_NEAR(s.theta[1], 0.25, 1e-12);
  EXPECT_NEAR(s.lambda_eq[0], 0.75, 1e-12);
  EXPECT_LT(oracle::qp_residuals(p, s).worst(), 1e-10);
}

TEST(Qp, ActiveSignConstraintGetsPositiveMultiplier) {
  QpProblem p = box_qp(DenseMatrix{{1}}, DenseVector{1});
  p.nonneg = true;
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.theta[0], 0.0, 1e-12);
  EXPECT_NEAR(s.lambda_sign[0], 1.0, 1e-12);
}

TEST(Qp, ObjectiveNeverIncreases) {
  std::mt19937_64 gen(99);
  for (int t = 0; t < 50; ++t) {
    const QpProblem p = oracle::random_qp(gen);
    const QpSolution s = solve_qp(p);
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    for (std::size_t i = 1; i < s.objective_trace.size(); ++i)
      EXPECT_LE(s.objective_trace[i], s.objective_trace[i - 1] + 1e-9 * std::max(1.0, std::abs(s.objective_trace[i - 1])));
  }
}

TEST(Qp, InfeasibleEqualities) {
  QpProblem p = box_qp(DenseMatrix{{1, 0}, {0, 1}}, DenseVector{0, 0});
  p.A_eq = DenseMatrix{{1, 1}, {1, 1}};
  p.b_eq = {1, 2};
  EXPECT_EQ(solve_qp(p).status, SolveStatus::Infeasible);
  QpProblem q = box_qp(DenseMatrix{{1}}, DenseVector{0});
  q.A_ineq = DenseMatrix{{1}};
  q.b_ineq = {1};
  q.nonneg = false;
  q.A_eq = DenseMatrix{{1}};
  q.b_eq = {0};
  EXPECT_EQ(solve_qp(q).status, SolveStatus::Infeasible);
}

TEST(Qp, RejectsIndefiniteQ) {
  EXPECT_THROW(solve_qp(box_qp(DenseMatrix{{1, 0}, {0, -1}}, DenseVector{0, 0})), PreconditionError);
  EXPECT_THROW(solve_qp(box_qp(DenseMatrix{{1, 2}, {0, 1}}, DenseVector{0, 0})), PreconditionError);
}

TEST(Qp, PsdCheckIsScaleRelative) {
  // tiny covariance-like matrices are accepted
  EXPECT_EQ(solve_qp(box_qp(DenseMatrix{{1e-6, 0}, {0, 2e-6}}, DenseVector{-1e-6, -2e-6})).status, SolveStatus::Optimal);
}

TEST(Qp, MatchesActiveSetEnumerationOnRandomProblems) {
  std::mt19937_64 gen(777);
  for (int t = 0; t < 200; ++t) {
    QpProblem p = oracle::random_qp(gen);
    const QpSolution s = solve_qp(p);
    p.normalize();
    const oracle::QpOracle o = oracle::qp_active_set_oracle(oracle::to_eigen(p.Q), oracle::to_eigen(p.c),
                                                            oracle::to_eigen(p.A_ineq), oracle::to_eigen(p.b_ineq),
                                                            oracle::to_eigen(p.A_eq), oracle::to_eigen(p.b_eq), p.nonneg);
    ASSERT_TRUE(o.feasible) << "problem " << t;
    ASSERT_EQ(s.status, SolveStatus::Optimal) << "problem " << t;
    EXPECT_NEAR(s.objective, o.objective, 1e-7 * std::max(1.0, std::abs(o.objective))) << "problem " << t;
    for (std::size_t j = 0; j < p.dim(); ++j) EXPECT_NEAR(s.theta[j], o.x(static_cast<Eigen::Index>(j)), 1e-7);
    EXPECT_LT(oracle::qp_residuals(p, s).worst(), 1e-7) << "problem " << t;
  }
}
