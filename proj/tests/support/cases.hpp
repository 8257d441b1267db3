// Shared test instances for the profiling tests and the acceptance run.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "mpinfer/experiments.hpp"
#include "mpinfer/inference.hpp"
#include "mpinfer/kkt.hpp"
#include "mpinfer/mpcc.hpp"
#include "support/oracles.hpp"

namespace cases {

// Closed form of the max-of-two-means statistic. With a = xbar1 - theta and
// b = xbar2 - theta the two feasible pieces keep one mean binding and let
// the other slack absorb any shortfall; min over s >= 0 of a quadratic in
// one variable.
inline double sim1_closed_form(const mpinfer::DenseVector& xbar, const mpinfer::DenseMatrix& cov, double n, double theta) {
  const Eigen::Matrix2d w = oracle::to_eigen(cov).inverse();
  auto piece = [&](int bind) {
    const int other = 1 - bind;
    Eigen::Vector2d g;
    g(bind) = xbar[static_cast<std::size_t>(bind)] - theta;
    g(other) = xbar[static_cast<std::size_t>(other)] - theta;
    const double s = std::max(0.0, -g(other) - w(other, bind) * g(bind) / w(other, other));
    g(other) += s;
    return n * g.dot(w * g);
  };
  return std::min(piece(0), piece(1));
}

struct TwoPairCase {
  mpinfer::LpProblem lp;
  mpinfer::EstimatedCoefficients est;
  mpinfer::DenseVector theta;
  oracle::LpSystem oracle_system;
  double scale = 1.0;  // magnitude of the true nuisance, used to size the brute-force box
};

// Two inequality rows, theta free, every coefficient estimated. The program
// is dual feasible by construction so the sample LP is bounded.
inline TwoPairCase random_two_pair(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> kd(1, 2);
  std::uniform_real_distribution<double> u(-2.0, 2.0), lam(0.2, 2.0), sl(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 0.2);
  const std::size_t k = static_cast<std::size_t>(kd(gen));
  const std::size_t m = 2;
  TwoPairCase tc;
  mpinfer::DenseMatrix a(m, k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) a(i, j) = u(gen);
  mpinfer::DenseVector l0{lam(gen), lam(gen)};
  mpinfer::DenseVector c = a.transpose() * l0;
  mpinfer::DenseVector th0(k);
  for (double& v : th0) v = u(gen);
  mpinfer::DenseVector b = a * th0;
  for (std::size_t i = 0; i < m; ++i) b[i] += sl(gen) < 0.5 ? 0.0 : sl(gen);
  tc.lp = mpinfer::LpProblem{a, b, c, false};
  tc.theta = th0;
  for (double& v : tc.theta) v += nd(gen);

  const std::size_t d = m * k + m + k;
  Eigen::MatrixXd lm(d, d);
  for (Eigen::Index i = 0; i < lm.rows(); ++i)
    for (Eigen::Index j = 0; j < lm.cols(); ++j) lm(i, j) = u(gen) / 2.0;
  const Eigen::MatrixXd v = 0.5 * (lm * lm.transpose() / static_cast<double>(d) + 0.2 * Eigen::MatrixXd::Identity(d, d));
  const mpinfer::DenseMatrix vd = oracle::from_eigen(v);
  tc.est = mpinfer::EstimatedCoefficients{mpinfer::stack_coefficients(tc.lp), mpinfer::symmetrize(vd), 100.0,
                                          std::vector<bool>(d, true)};
  tc.oracle_system = oracle::LpSystem{oracle::to_eigen(a), oracle::to_eigen(b), oracle::to_eigen(c),
                                      oracle::to_eigen(tc.theta), oracle::to_eigen(tc.est.V_hat), 100.0};
  tc.scale = std::max({l0[0], l0[1], 1.0});
  return tc;
}

struct TwoPairComparison {
  double library = 0.0;
  double brute = 0.0;
  bool ok = false;
};

inline TwoPairComparison compare_two_pair(const TwoPairCase& tc, double tol = 1e-3) {
  const mpinfer::KktSystem sys = mpinfer::build_lp_system(tc.lp, tc.est);
  const mpinfer::ProfileResult pr = mpinfer::profile_statistic(sys, tc.est, tc.theta);
  double box = 4.0 * tc.scale;
  for (double v : pr.lambda_star) box = std::max(box, 2.0 * v);
  for (double v : pr.s_star) box = std::max(box, 2.0 * v);
  const oracle::BruteResult br = oracle::lp_brute_force(tc.oracle_system, box);
  TwoPairComparison out{pr.statistic, br.value, false};
  out.ok = std::abs(pr.statistic - br.value) <= tol * std::max(1.0, std::abs(br.value));
  return out;
}

struct ComponentCheck {
  std::size_t accepted = 0;
  std::size_t reached = 0;
  double seed_distance = 0.0;  // sup-norm distance from the target to the nearest accepted point
};

// Flood fill over lattice adjacency from the accepted point nearest `target`.
inline ComponentCheck flood_from(const mpinfer::ConfidenceSet& cs, const mpinfer::DenseVector& target) {
  const std::vector<mpinfer::GridPoint> acc = cs.accepted();
  ComponentCheck out;
  out.accepted = acc.size();
  if (acc.empty()) return out;
  std::size_t seed = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < acc.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < target.size(); ++j) d = std::max(d, std::abs(acc[i].theta[j] - target[j]));
    if (d < best) {
      best = d;
      seed = i;
    }
  }
  out.seed_distance = best;
  std::vector<bool> seen(acc.size(), false);
  std::vector<std::size_t> stack{seed};
  seen[seed] = true;
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    ++out.reached;
    for (std::size_t i = 0; i < acc.size(); ++i)
      if (!seen[i] && mpinfer::lattice_adjacent(acc[cur], acc[i], cs.simplex_lattice)) {
        seen[i] = true;
        stack.push_back(i);
      }
  }
  return out;
}

}  // namespace cases
