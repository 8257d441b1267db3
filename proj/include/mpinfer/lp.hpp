/**
 * @file lp.hpp
 * @brief Dense two-phase primal simplex for max c'theta s.t. A theta <= b.
 *
 * Free variables are split into positive and negative parts; the optional
 * theta >= 0 restriction is carried as variable bounds, and its multipliers
 * are reported separately in LpSolution::sign_lambda so that
 *   A' lambda - sign_lambda = c.
 * Entering and leaving variables follow Bland's rule. Primal values and
 * duals are recomputed from the final basis with an LU solve.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"

namespace mpinfer {

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIterations };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

struct LpProblem {
  DenseMatrix A;  ///< m x k
  DenseVector b;  ///< m
  DenseVector c;  ///< k
  bool nonneg = false;

  std::size_t rows() const { return A.rows(); }
  std::size_t dim() const { return c.size(); }

  void validate() const {
    if (A.rows() != b.size()) throw DimensionMismatch("LpProblem: rows(A) != len(b)");
    if (A.cols() != c.size()) throw DimensionMismatch("LpProblem: cols(A) != len(c)");
    if (c.size() == 0) throw DimensionMismatch("LpProblem: empty decision vector");
  }
};

struct LpSolution {
  DenseVector theta;
  DenseVector lambda;       ///< multipliers on A theta <= b
  DenseVector sign_lambda;  ///< multipliers on theta >= 0 (empty unless nonneg)
  DenseVector slack;        ///< b - A theta
  double objective = 0.0;
  SolveStatus status = SolveStatus::Infeasible;
  std::size_t iterations = 0;
};

namespace detail {

struct Tableau {
  std::size_t m = 0;
  std::size_t n = 0;             // structural + slack + artificial columns
  std::vector<double> t;         // m x (n+1), last column is rhs
  std::vector<std::size_t> basis;

  double& at(std::size_t r, std::size_t j) { return t[r * (n + 1) + j]; }
  double at(std::size_t r, std::size_t j) const { return t[r * (n + 1) + j]; }
  double& rhs(std::size_t r) { return t[r * (n + 1) + n]; }

  void pivot(std::size_t r, std::size_t j) {
    const double p = at(r, j);
    for (std::size_t q = 0; q <= n; ++q) at(r, q) /= p;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == r) continue;
      const double f = at(i, j);
      if (f == 0.0) continue;
      for (std::size_t q = 0; q <= n; ++q) at(i, q) -= f * at(r, q);
      at(i, j) = 0.0;
    }
    at(r, j) = 1.0;
    basis[r] = j;
  }
};

enum class PhaseResult { Optimal, Unbounded, IterationLimit };

// Maximizes cost'x over the current tableau; columns with allowed[j]=false
// never enter.
inline PhaseResult run_phase(Tableau& tab, const std::vector<double>& cost, const std::vector<bool>& allowed,
                             std::size_t& iterations, std::size_t max_iterations) {
  constexpr double kReducedTol = 1e-11;
  constexpr double kPivotTol = 1e-11;
  std::vector<double> cb(tab.m);
  while (true) {
    if (iterations >= max_iterations) return PhaseResult::IterationLimit;
    for (std::size_t r = 0; r < tab.m; ++r) cb[r] = cost[tab.basis[r]];
    std::size_t enter = tab.n;
    for (std::size_t j = 0; j < tab.n; ++j) {
      if (!allowed[j]) continue;
      double d = cost[j];
      for (std::size_t r = 0; r < tab.m; ++r) d -= cb[r] * tab.at(r, j);
      if (d > kReducedTol) {
        enter = j;
        break;
      }
    }
    if (enter == tab.n) return PhaseResult::Optimal;

    std::size_t leave = tab.m;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < tab.m; ++r) {
      const double a = tab.at(r, enter);
      if (a <= kPivotTol) continue;
      const double ratio = std::max(tab.rhs(r), 0.0) / a;
      const bool better = leave == tab.m || ratio < best_ratio - 1e-14;
      const bool tie_lower_index = !better && ratio <= best_ratio + 1e-14 && tab.basis[r] < tab.basis[leave];
      if (better || tie_lower_index) {
        best_ratio = std::min(best_ratio, ratio);
        leave = r;
      }
    }
    if (leave == tab.m) return PhaseResult::Unbounded;
    tab.pivot(leave, enter);
    ++iterations;
  }
}

}  // namespace detail

/// Solves max c'theta s.t. A theta <= b (and theta >= 0 when p.nonneg).
inline LpSolution solve_lp(const LpProblem& p) {
  p.validate();
  const std::size_t m = p.rows();
  const std::size_t k = p.dim();
  const std::size_t nstruct = p.nonneg ? k : 2 * k;
  const std::size_t slack0 = nstruct;
  const std::size_t art0 = slack0 + m;

  // Standard-form matrix with original row signs: [A, -A, I] or [A, I].
  auto std_coef = [&](std::size_t i, std::size_t j) -> double {
    if (j < k) return p.A(i, j);
    if (j < nstruct) return -p.A(i, j - k);
    if (j < art0) return (j - slack0 == i) ? 1.0 : 0.0;
    return 0.0;
  };

  std::vector<std::size_t> art_rows;
  for (std::size_t i = 0; i < m; ++i)
    if (p.b[i] < 0.0) art_rows.push_back(i);

  detail::Tableau tab;
  tab.m = m;
  tab.n = art0 + art_rows.size();
  tab.t.assign(m * (tab.n + 1), 0.0);
  tab.basis.assign(m, 0);
  std::vector<double> row_sign(m, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    row_sign[i] = p.b[i] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < art0; ++j) tab.at(i, j) = row_sign[i] * std_coef(i, j);
    tab.rhs(i) = row_sign[i] * p.b[i];
    tab.basis[i] = slack0 + i;
  }
  for (std::size_t a = 0; a < art_rows.size(); ++a) {
    const std::size_t i = art_rows[a];
    tab.at(i, art0 + a) = 1.0;
    tab.basis[i] = art0 + a;
  }

  LpSolution sol;
  constexpr std::size_t kMaxIterations = 50000;
  std::vector<bool> allowed(tab.n, true);

  if (!art_rows.empty()) {
    std::vector<double> phase1_cost(tab.n, 0.0);
    for (std::size_t a = 0; a < art_rows.size(); ++a) phase1_cost[art0 + a] = -1.0;
    const auto r1 = detail::run_phase(tab, phase1_cost, allowed, sol.iterations, kMaxIterations);
    if (r1 == detail::PhaseResult::IterationLimit) {
      sol.status = SolveStatus::MaxIterations;
      return sol;
    }
    double infeas = 0.0;
    for (std::size_t r = 0; r < m; ++r)
      if (tab.basis[r] >= art0) infeas += std::max(tab.rhs(r), 0.0);
    if (infeas > 1e-9) {
      sol.status = SolveStatus::Infeasible;
      return sol;
    }
    // Drive remaining (zero-level) artificials out of the basis.
    for (std::size_t r = 0; r < m; ++r) {
      if (tab.basis[r] < art0) continue;
      std::size_t best_j = art0;
      double best = 0.0;
      for (std::size_t j = 0; j < art0; ++j) {
        if (std::abs(tab.at(r, j)) > best) {
          best = std::abs(tab.at(r, j));
          best_j = j;
        }
      }
      if (best_j < art0) tab.pivot(r, best_j);
    }
    for (std::size_t j = art0; j < tab.n; ++j) allowed[j] = false;
  }

  std::vector<double> cost(tab.n, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    cost[j] = p.c[j];
    if (!p.nonneg) cost[k + j] = -p.c[j];
  }
  const auto r2 = detail::run_phase(tab, cost, allowed, sol.iterations, kMaxIterations);
  if (r2 == detail::PhaseResult::IterationLimit) {
    sol.status = SolveStatus::MaxIterations;
    return sol;
  }
  if (r2 == detail::PhaseResult::Unbounded) {
    sol.status = SolveStatus::Unbounded;
    return sol;
  }

  // Recompute x_B and duals from the final basis in the unscaled system.
  std::vector<double> x(art0, 0.0);
  DenseVector y(m, 0.0);
  bool clean_basis = true;
  for (std::size_t r = 0; r < m; ++r)
    if (tab.basis[r] >= art0) clean_basis = false;
  bool recomputed = false;
  if (clean_basis) {
    DenseMatrix basis_mat(m, m);
    DenseVector cb(m);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t i = 0; i < m; ++i) basis_mat(i, r) = std_coef(i, tab.basis[r]);
      cb[r] = cost[tab.basis[r]];
    }
    try {
      const DenseVector xb = solve(basis_mat, p.b);
      y = solve(basis_mat.transpose(), cb);
      for (std::size_t r = 0; r < m; ++r) x[tab.basis[r]] = std::max(xb[r], 0.0);
      recomputed = true;
    } catch (const SingularMatrix&) {
      recomputed = false;
    }
  }
  if (!recomputed) {
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t r = 0; r < m; ++r)
      if (tab.basis[r] < art0) x[tab.basis[r]] = std::max(tab.rhs(r), 0.0);
    // Duals from slack reduced costs: z_j - c_j for column slack0 + i.
    for (std::size_t i = 0; i < m; ++i) {
      double z = 0.0;
      for (std::size_t r = 0; r < m; ++r) z += cost[tab.basis[r]] * tab.at(r, slack0 + i);
      y[i] = z;
    }
  }

  sol.theta = DenseVector(k);
  for (std::size_t j = 0; j < k; ++j) sol.theta[j] = p.nonneg ? x[j] : x[j] - x[k + j];
  sol.lambda = y;
  sol.slack = p.b - p.A * sol.theta;
  if (p.nonneg) sol.sign_lambda = p.A.transpose() * sol.lambda - p.c;
  sol.objective = dot(p.c, sol.theta);
  sol.status = SolveStatus::Optimal;
  return sol;
}

struct LpVertex {
  DenseVector theta;
  double objective = 0.0;
};

/// Brute-force basic feasible points: every choice of k binding constraints
/// (sign rows included when nonneg), solved, filtered for feasibility and
/// de-duplicated. Sorted by objective, best first.
inline std::vector<LpVertex> enumerate_vertices(const LpProblem& p) {
  p.validate();
  const std::size_t m = p.rows();
  const std::size_t k = p.dim();
  if (m + k > 20) throw DimensionGuard("enumerate_vertices: m + k > 20");

  DenseMatrix rows = p.A;
  DenseVector rhs = p.b;
  if (p.nonneg) {
    rows = vstack(rows, -1.0 * DenseMatrix::identity(k));
    rhs = concat(rhs, DenseVector(k, 0.0));
  }
  const std::size_t total = rows.rows();
  std::vector<LpVertex> out;
  if (total < k) return out;

  std::vector<std::size_t> pick(k);
  for (std::size_t i = 0; i < k; ++i) pick[i] = i;
  while (true) {
    const DenseMatrix sub = select_rows(rows, pick);
    const DenseVector sub_rhs = select(rhs, pick);
    try {
      const DenseVector theta = solve(sub, sub_rhs);
      const DenseVector lhs = rows * theta;
      bool feasible = true;
      for (std::size_t i = 0; i < total; ++i)
        if (lhs[i] > rhs[i] + 1e-9 * (1.0 + std::abs(rhs[i]))) feasible = false;
      if (feasible) {
        bool dup = false;
        for (const auto& v : out)
          if (norm_inf(v.theta - theta) <= 1e-9 * (1.0 + norm_inf(theta))) dup = true;
        if (!dup) out.push_back({theta, dot(p.c, theta)});
      }
    } catch (const SingularMatrix&) {
    }
    // next k-combination of [0, total)
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == total - k + (i - 1)) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LpVertex& a, const LpVertex& b) { return a.objective > b.objective; });
  return out;
}

}  // namespace mpinfer
