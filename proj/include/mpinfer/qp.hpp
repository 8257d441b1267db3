/**
 * @file qp.hpp
 * @brief Primal active-set solver for convex QPs
 *
 *     min  c'theta + 1/2 theta'Q theta
 *     s.t. A_ineq theta >= b_ineq,  A_eq theta = b_eq,  [theta >= 0]
 *
 * Q may be singular. Each iteration works in the null space of the current
 * working set: positive-curvature directions take a Newton step, and a
 * descent direction of zero curvature is followed as a ray until a
 * constraint blocks it (no block means the problem is unbounded).
 * The starting point is a feasible vertex from the LP phase 1.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"
#include "mpinfer/lp.hpp"

namespace mpinfer {

struct QpProblem {
  DenseMatrix Q;       ///< k x k, symmetric PSD
  DenseVector c;       ///< k
  DenseMatrix A_ineq;  ///< m_in x k (may have zero rows)
  DenseVector b_ineq;
  DenseMatrix A_eq;    ///< m_eq x k (may have zero rows)
  DenseVector b_eq;
  bool nonneg = false;

  std::size_t dim() const { return c.size(); }
  std::size_t ineq_rows() const { return A_ineq.rows(); }
  std::size_t eq_rows() const { return A_eq.rows(); }

  /// Gives empty constraint blocks the right column count.
  void normalize() {
    if (A_ineq.rows() == 0) A_ineq = DenseMatrix(0, dim());
    if (A_eq.rows() == 0) A_eq = DenseMatrix(0, dim());
  }

  void validate(bool check_psd = true) const {
    const std::size_t k = dim();
    if (k == 0) throw DimensionMismatch("QpProblem: empty decision vector");
    if (Q.rows() != k || Q.cols() != k) throw DimensionMismatch("QpProblem: Q must be k x k");
    if (A_ineq.rows() != b_ineq.size()) throw DimensionMismatch("QpProblem: rows(A_ineq) != len(b_ineq)");
    if (A_ineq.rows() > 0 && A_ineq.cols() != k) throw DimensionMismatch("QpProblem: cols(A_ineq) != k");
    if (A_eq.rows() != b_eq.size()) throw DimensionMismatch("QpProblem: rows(A_eq) != len(b_eq)");
    if (A_eq.rows() > 0 && A_eq.cols() != k) throw DimensionMismatch("QpProblem: cols(A_eq) != k");
    const double scale = std::max(1.0, max_abs(Q));
    if (!is_symmetric(Q, 1e-10 * scale)) throw PreconditionError("QpProblem: Q not symmetric");
    if (check_psd) {
      DenseMatrix shifted = symmetrize(Q);
      for (std::size_t i = 0; i < k; ++i) shifted(i, i) += 1e-8 * scale;
      try {
        (void)cholesky(shifted);
      } catch (const NotPositiveDefinite&) {
        throw PreconditionError("QpProblem: Q is not positive semidefinite");
      }
    }
  }
};

struct QpSolution {
  DenseVector theta;
  DenseVector lambda_ineq;  ///< >= 0, pairs with slack
  DenseVector lambda_eq;    ///< sign-free
  DenseVector lambda_sign;  ///< multipliers on theta >= 0 (empty unless nonneg)
  DenseVector slack;        ///< A_ineq theta - b_ineq
  double objective = 0.0;
  SolveStatus status = SolveStatus::Infeasible;
  std::size_t iterations = 0;
  std::vector<double> objective_trace;  ///< objective after every step
};

struct QpOptions {
  std::size_t max_iterations = 1000;
  bool check_psd = true;
};

inline double qp_objective(const QpProblem& p, const DenseVector& x) {
  return dot(p.c, x) + 0.5 * dot(x, p.Q * x);
}

inline QpSolution solve_qp(QpProblem p, const QpOptions& opts = {}) {
  p.normalize();
  p.validate(opts.check_psd);
  const std::size_t k = p.dim();
  const std::size_t m_in = p.ineq_rows();
  const std::size_t m_eq = p.eq_rows();
  const std::size_t m_sign = p.nonneg ? k : 0;

  // Inequalities a_i'x >= b_i: user rows first, then sign rows.
  const std::size_t n_ineq = m_in + m_sign;
  DenseMatrix ineq = p.A_ineq;
  DenseVector ineq_rhs = p.b_ineq;
  if (p.nonneg) {
    ineq = vstack(ineq, DenseMatrix::identity(k));
    ineq_rhs = concat(ineq_rhs, DenseVector(k, 0.0));
  }

  QpSolution sol;

  // Phase 1: any feasible vertex.
  DenseVector x(k, 0.0);
  {
    LpProblem feas;
    feas.A = vstack(vstack(-1.0 * p.A_ineq, p.A_eq), -1.0 * p.A_eq);
    feas.b = concat(concat(-1.0 * p.b_ineq, p.b_eq), -1.0 * p.b_eq);
    feas.c = DenseVector(k, 0.0);
    feas.nonneg = p.nonneg;
    if (feas.A.rows() == 0) feas.A = DenseMatrix(0, k);
    if (feas.A.rows() > 0) {
      const LpSolution lp = solve_lp(feas);
      if (lp.status != SolveStatus::Optimal) {
        sol.status = lp.status == SolveStatus::MaxIterations ? SolveStatus::MaxIterations : SolveStatus::Infeasible;
        return sol;
      }
      x = lp.theta;
    }
  }

  // Working set: indices into [eq rows) and [ineq rows), kept full row rank.
  struct Entry {
    bool is_eq;
    std::size_t idx;
  };
  std::vector<Entry> work;
  auto row_of = [&](const Entry& e) { return e.is_eq ? p.A_eq.row_copy(e.idx) : ineq.row_copy(e.idx); };
  auto independent_of_work = [&](const DenseVector& a) {
    if (work.empty()) return norm2(a) > 0.0;
    DenseMatrix aw(work.size(), k);
    for (std::size_t r = 0; r < work.size(); ++r) {
      const DenseVector w = row_of(work[r]);
      for (std::size_t j = 0; j < k; ++j) aw(r, j) = w[j];
    }
    if (work.size() >= k) return false;
    const DenseMatrix z = null_space(aw, k);
    const DenseVector proj = z.transpose() * a;
    return norm2(proj) > 1e-9 * std::max(1.0, norm2(a));
  };
  std::vector<bool> eq_in_work(m_eq, false);
  for (std::size_t r = 0; r < m_eq; ++r) {
    if (independent_of_work(p.A_eq.row_copy(r))) {
      work.push_back({true, r});
      eq_in_work[r] = true;
    }
  }
  std::vector<bool> in_work(n_ineq, false);

  auto working_matrix = [&]() {
    DenseMatrix aw(work.size(), k);
    for (std::size_t r = 0; r < work.size(); ++r) {
      const DenseVector w = row_of(work[r]);
      for (std::size_t j = 0; j < k; ++j) aw(r, j) = w[j];
    }
    return aw;
  };
  // Least-squares multipliers for g = A_W' lambda.
  auto multipliers = [&](const DenseMatrix& aw, const DenseVector& g) {
    if (aw.rows() == 0) return DenseVector();
    const DenseMatrix gram = aw * aw.transpose();
    return solve(gram, aw * g);
  };

  const double q_scale = std::max(1.0, max_abs(p.Q));
  double objective = qp_objective(p, x);
  sol.objective_trace.push_back(objective);
  DenseVector lambda_w;
  bool converged = false;

  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    sol.iterations = it + 1;
    const DenseVector g = p.c + p.Q * x;
    const DenseMatrix aw = working_matrix();
    const DenseMatrix z = null_space(aw, k);

    DenseVector step(k, 0.0);
    bool ray = false;
    if (z.cols() > 0) {
      const DenseMatrix h = z.transpose() * p.Q * z;
      const DenseVector r = z.transpose() * g;
      const SymmetricEigen eig = sym_eigen(h);
      const double dthr = 1e-10 * std::max(q_scale, std::abs(eig.values[eig.values.size() - 1]));
      DenseVector zero_dir(z.cols(), 0.0);
      DenseVector newton(z.cols(), 0.0);
      for (std::size_t e = 0; e < z.cols(); ++e) {
        double ur = 0.0;
        for (std::size_t q = 0; q < z.cols(); ++q) ur += eig.vectors(q, e) * r[q];
        if (eig.values[e] <= dthr) {
          for (std::size_t q = 0; q < z.cols(); ++q) zero_dir[q] -= ur * eig.vectors(q, e);
        } else {
          for (std::size_t q = 0; q < z.cols(); ++q) newton[q] -= (ur / eig.values[e]) * eig.vectors(q, e);
        }
      }
      if (norm2(zero_dir) > 1e-10 * std::max(1.0, norm2(r))) {
        step = z * zero_dir;
        ray = true;
      } else {
        step = z * newton;
      }
    }

    if (!ray && norm_inf(step) <= 1e-12 * (1.0 + norm_inf(x))) {
      lambda_w = multipliers(aw, g);
      // Most negative inequality multiplier leaves; ties go to the lowest index.
      std::size_t drop = work.size();
      for (std::size_t r = 0; r < work.size(); ++r) {
        if (work[r].is_eq || lambda_w[r] >= -1e-9) continue;
        if (drop == work.size() || lambda_w[r] < lambda_w[drop] ||
            (lambda_w[r] == lambda_w[drop] && work[r].idx < work[drop].idx)) {
          drop = r;
        }
      }
      if (drop == work.size()) {
        converged = true;
        break;
      }
      in_work[work[drop].idx] = false;
      work.erase(work.begin() + static_cast<std::ptrdiff_t>(drop));
      continue;
    }

    double alpha = ray ? std::numeric_limits<double>::infinity() : 1.0;
    std::size_t blocking = n_ineq;
    const double step_norm = norm2(step);
    for (std::size_t i = 0; i < n_ineq; ++i) {
      if (in_work[i]) continue;
      const DenseVector a = ineq.row_copy(i);
      const double ap = dot(a, step);
      if (ap >= -1e-14 * norm2(a) * step_norm) continue;
      const double room = std::max(0.0, dot(a, x) - ineq_rhs[i]);
      const double ai = room / (-ap);
      if (ai < alpha) {
        alpha = ai;
        blocking = i;
      }
    }
    if (!std::isfinite(alpha)) {
      sol.status = SolveStatus::Unbounded;
      return sol;
    }
    for (std::size_t j = 0; j < k; ++j) x[j] += alpha * step[j];
    if (blocking < n_ineq) {
      work.push_back({false, blocking});
      in_work[blocking] = true;
    }
    objective = qp_objective(p, x);
    sol.objective_trace.push_back(objective);
  }

  if (!converged) {
    sol.status = SolveStatus::MaxIterations;
    sol.theta = x;
    return sol;
  }

  sol.theta = x;
  sol.lambda_ineq = DenseVector(m_in, 0.0);
  sol.lambda_eq = DenseVector(m_eq, 0.0);
  if (p.nonneg) sol.lambda_sign = DenseVector(k, 0.0);
  for (std::size_t r = 0; r < work.size(); ++r) {
    const double lam = lambda_w[r];
    if (work[r].is_eq) {
      sol.lambda_eq[work[r].idx] = lam;
    } else if (work[r].idx < m_in) {
      sol.lambda_ineq[work[r].idx] = std::max(lam, 0.0);
    } else {
      sol.lambda_sign[work[r].idx - m_in] = std::max(lam, 0.0);
    }
  }
  sol.slack = p.A_ineq * x - p.b_ineq;
  sol.objective = qp_objective(p, x);
  sol.status = SolveStatus::Optimal;
  return sol;
}

}  // namespace mpinfer
