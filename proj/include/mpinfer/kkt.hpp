/**
 * @file kkt.hpp
 * @brief Optimality conditions of an LP or convex QP as moment equalities.
 *
 * Every optimality row is bilinear: affine in the stacked coefficient vector
 * for fixed (theta, lambda, s), and affine in the nuisance (lambda, s) for
 * fixed coefficients and theta. Rows that touch at least one estimated
 * coefficient become moments; rows built only from known constants are
 * enforced exactly when profiling.
 *
 * Stacked coefficient layouts (vec is column-major):
 *   LP:  (vec(A), b, c)
 *   QP:  (vec(Q), vec(A_ineq), b_ineq, vec(A_eq), b_eq, c)
 *
 * Row order: inequality primal rows, equality primal rows, dual rows.
 *   LP primal  i: A_i theta + s_i - b_i
 *   LP dual    j: (A' lambda)_j - mu_j - c_j
 *   QP primal  i: A_ineq,i theta - b_ineq,i - s_i
 *   QP equality r: A_eq,r theta - b_eq,r
 *   QP dual    j: (A_ineq' lambda + A_eq' nu)_j + mu_j - c_j - (Q theta)_j
 * mu are the multipliers of theta >= 0 (present only when nonneg); each is
 * paired with theta_j itself, which acts as its own slack.
 *
 * Nuisance layout: z = (lambda_ineq, nu_eq, mu_sign, s).
 */
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"
#include "mpinfer/lp.hpp"
#include "mpinfer/qp.hpp"

namespace mpinfer {

enum class ProgramKind { Lp, Qp };

/// Point estimates of the stacked coefficients and their asymptotic
/// covariance, sqrt(n)(est - truth) -> N(0, V).
struct EstimatedCoefficients {
  DenseVector point;
  DenseMatrix V_hat;
  double n = 1.0;
  std::vector<bool> stochastic_mask;

  std::size_t dim() const { return point.size(); }

  void validate() const {
    const std::size_t d = point.size();
    if (V_hat.rows() != d || V_hat.cols() != d)
      throw DimensionMismatch("EstimatedCoefficients: V_hat must be " + std::to_string(d) + "x" + std::to_string(d));
    if (stochastic_mask.size() != d) throw DimensionMismatch("EstimatedCoefficients: mask length mismatch");
    if (!(n > 0.0)) throw PreconditionError("EstimatedCoefficients: n must be positive");
    if (!is_symmetric(V_hat, 1e-8)) throw PreconditionError("EstimatedCoefficients: V_hat not symmetric");
    for (std::size_t i = 0; i < d; ++i) {
      if (stochastic_mask[i]) continue;
      for (std::size_t j = 0; j < d; ++j)
        if (V_hat(i, j) != 0.0 || V_hat(j, i) != 0.0)
          throw PreconditionError("EstimatedCoefficients: V_hat row/col " + std::to_string(i) +
                                  " must be zero for a known coefficient");
    }
  }

  std::vector<std::size_t> stochastic_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < stochastic_mask.size(); ++i)
      if (stochastic_mask[i]) idx.push_back(i);
    return idx;
  }

  /// Coefficients known exactly: zero covariance, empty mask.
  static EstimatedCoefficients known(const DenseVector& point, double n = 1.0) {
    return {point, DenseMatrix(point.size(), point.size()), n, std::vector<bool>(point.size(), false)};
  }
};

// ---------------------------------------------------------------------------
// Coefficient stacking

inline DenseVector stack_coefficients(const LpProblem& p) {
  return concat(concat(vec(p.A), p.b), p.c);
}

inline DenseVector stack_coefficients(QpProblem p) {
  p.normalize();
  DenseVector out = vec(p.Q);
  out = concat(out, vec(p.A_ineq));
  out = concat(out, p.b_ineq);
  out = concat(out, vec(p.A_eq));
  out = concat(out, p.b_eq);
  return concat(out, p.c);
}

/// Rebuilds a problem with the shape of `shape` from a stacked point.
inline LpProblem unstack_lp(const LpProblem& shape, const DenseVector& point) {
  const std::size_t m = shape.rows();
  const std::size_t k = shape.dim();
  if (point.size() != m * k + m + k) throw DimensionMismatch("unstack_lp: stacked length mismatch");
  LpProblem p = shape;
  DenseVector a(std::vector<double>(point.begin(), point.begin() + static_cast<std::ptrdiff_t>(m * k)));
  p.A = unvec(a, m, k);
  for (std::size_t i = 0; i < m; ++i) p.b[i] = point[m * k + i];
  for (std::size_t j = 0; j < k; ++j) p.c[j] = point[m * k + m + j];
  return p;
}

struct QpLayout {
  std::size_t k = 0, m_in = 0, m_eq = 0;
  std::size_t Q = 0, A_ineq = 0, b_ineq = 0, A_eq = 0, b_eq = 0, c = 0, total = 0;

  explicit QpLayout(std::size_t k_, std::size_t m_in_, std::size_t m_eq_) : k(k_), m_in(m_in_), m_eq(m_eq_) {
    Q = 0;
    A_ineq = Q + k * k;
    b_ineq = A_ineq + m_in * k;
    A_eq = b_ineq + m_in;
    b_eq = A_eq + m_eq * k;
    c = b_eq + m_eq;
    total = c + k;
  }
  std::size_t q_at(std::size_t i, std::size_t j) const { return Q + j * k + i; }
  std::size_t a_ineq_at(std::size_t i, std::size_t j) const { return A_ineq + j * m_in + i; }
  std::size_t a_eq_at(std::size_t r, std::size_t j) const { return A_eq + j * m_eq + r; }
};

inline QpProblem unstack_qp(QpProblem shape, const DenseVector& point) {
  shape.normalize();
  const QpLayout L(shape.dim(), shape.ineq_rows(), shape.eq_rows());
  if (point.size() != L.total) throw DimensionMismatch("unstack_qp: stacked length mismatch");
  QpProblem p = shape;
  for (std::size_t i = 0; i < L.k; ++i)
    for (std::size_t j = 0; j < L.k; ++j) p.Q(i, j) = point[L.q_at(i, j)];
  for (std::size_t i = 0; i < L.m_in; ++i) {
    for (std::size_t j = 0; j < L.k; ++j) p.A_ineq(i, j) = point[L.a_ineq_at(i, j)];
    p.b_ineq[i] = point[L.b_ineq + i];
  }
  for (std::size_t r = 0; r < L.m_eq; ++r) {
    for (std::size_t j = 0; j < L.k; ++j) p.A_eq(r, j) = point[L.a_eq_at(r, j)];
    p.b_eq[r] = point[L.b_eq + r];
  }
  for (std::size_t j = 0; j < L.k; ++j) p.c[j] = point[L.c + j];
  return p;
}

// ---------------------------------------------------------------------------
// KKT system

/// The slack member of a complementarity pair: either a nuisance slack
/// s_i or a component of theta (for theta >= 0 sign constraints).
struct SlackRef {
  enum class Kind { Nuisance, Theta };
  Kind kind = Kind::Nuisance;
  std::size_t index = 0;  ///< into z for Nuisance, into theta for Theta
};

struct ComplementarityPair {
  std::size_t multiplier = 0;  ///< index into z
  SlackRef slack;
};

struct KktSystem {
  ProgramKind kind = ProgramKind::Lp;
  std::size_t k = 0;     ///< dim(theta)
  std::size_t m_in = 0;  ///< inequality rows (LP: all rows)
  std::size_t m_eq = 0;
  bool nonneg = false;
  std::size_t coef_dim = 0;

  std::vector<std::size_t> moment_rows;
  std::vector<std::size_t> constraint_rows;
  std::vector<ComplementarityPair> complementarity_pairs;
  std::vector<std::size_t> equality_multiplier_indices;
  std::vector<std::size_t> stochastic_columns;
  std::size_t df = 0;

  /// (multipliers, slacks) of the program solved at the point estimate.
  std::optional<DenseVector> warm_start;

  std::size_t total_rows() const { return m_in + m_eq + k; }
  std::size_t sign_count() const { return nonneg ? k : 0; }
  std::size_t multiplier_count() const { return m_in + m_eq + sign_count(); }
  std::size_t slack_count() const { return m_in; }
  std::size_t nuisance_dim() const { return multiplier_count() + slack_count(); }
  std::size_t slack_offset() const { return multiplier_count(); }

  /// Entries of z restricted to be >= 0 (everything except equality multipliers).
  std::vector<bool> sign_restricted() const {
    std::vector<bool> out(nuisance_dim(), true);
    for (std::size_t i : equality_multiplier_indices) out[i] = false;
    return out;
  }

  std::string row_label(std::size_t r) const {
    if (r < m_in) return "primal[" + std::to_string(r) + "]";
    if (r < m_in + m_eq) return "equality[" + std::to_string(r - m_in) + "]";
    return "dual[" + std::to_string(r - m_in - m_eq) + "]";
  }
};

namespace detail {

struct RowShape {
  ProgramKind kind;
  std::size_t k, m_in, m_eq;
  bool nonneg;
};

inline RowShape shape_of(const KktSystem& s) { return {s.kind, s.k, s.m_in, s.m_eq, s.nonneg}; }

/// Stacked-coefficient indices appearing in row r.
inline std::vector<std::size_t> row_coefficients(const RowShape& sh, std::size_t r) {
  std::vector<std::size_t> idx;
  const std::size_t k = sh.k;
  if (sh.kind == ProgramKind::Lp) {
    const std::size_t m = sh.m_in;
    if (r < m) {
      for (std::size_t j = 0; j < k; ++j) idx.push_back(j * m + r);
      idx.push_back(m * k + r);
    } else {
      const std::size_t j = r - m;
      for (std::size_t i = 0; i < m; ++i) idx.push_back(j * m + i);
      idx.push_back(m * k + m + j);
    }
    return idx;
  }
  const QpLayout L(k, sh.m_in, sh.m_eq);
  if (r < sh.m_in) {
    for (std::size_t j = 0; j < k; ++j) idx.push_back(L.a_ineq_at(r, j));
    idx.push_back(L.b_ineq + r);
  } else if (r < sh.m_in + sh.m_eq) {
    const std::size_t q = r - sh.m_in;
    for (std::size_t j = 0; j < k; ++j) idx.push_back(L.a_eq_at(q, j));
    idx.push_back(L.b_eq + q);
  } else {
    const std::size_t j = r - sh.m_in - sh.m_eq;
    for (std::size_t l = 0; l < k; ++l) idx.push_back(L.q_at(j, l));
    for (std::size_t i = 0; i < sh.m_in; ++i) idx.push_back(L.a_ineq_at(i, j));
    for (std::size_t q = 0; q < sh.m_eq; ++q) idx.push_back(L.a_eq_at(q, j));
    idx.push_back(L.c + j);
  }
  return idx;
}

/// All optimality rows at (coefficients, theta, z).
inline DenseVector all_rows(const RowShape& sh, const DenseVector& beta, const DenseVector& theta,
                            const DenseVector& z) {
  const std::size_t k = sh.k;
  const std::size_t m_in = sh.m_in;
  const std::size_t m_eq = sh.m_eq;
  const std::size_t nsign = sh.nonneg ? k : 0;
  const std::size_t mult = m_in + m_eq + nsign;
  DenseVector out(m_in + m_eq + k);
  if (sh.kind == ProgramKind::Lp) {
    const std::size_t m = m_in;
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += beta[j * m + i] * theta[j];
      out[i] = acc + z[mult + i] - beta[m * k + i];
    }
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += beta[j * m + i] * z[i];
      if (sh.nonneg) acc -= z[m + j];
      out[m + j] = acc - beta[m * k + m + j];
    }
    return out;
  }
  const QpLayout L(k, m_in, m_eq);
  for (std::size_t i = 0; i < m_in; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += beta[L.a_ineq_at(i, j)] * theta[j];
    out[i] = acc - beta[L.b_ineq + i] - z[mult + i];
  }
  for (std::size_t q = 0; q < m_eq; ++q) {
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += beta[L.a_eq_at(q, j)] * theta[j];
    out[m_in + q] = acc - beta[L.b_eq + q];
  }
  for (std::size_t j = 0; j < k; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m_in; ++i) acc += beta[L.a_ineq_at(i, j)] * z[i];
    for (std::size_t q = 0; q < m_eq; ++q) acc += beta[L.a_eq_at(q, j)] * z[m_in + q];
    if (sh.nonneg) acc += z[m_in + m_eq + j];
    acc -= beta[L.c + j];
    for (std::size_t l = 0; l < k; ++l) acc -= beta[L.q_at(j, l)] * theta[l];
    out[m_in + m_eq + j] = acc;
  }
  return out;
}

/// d(rows)/d(beta) at (theta, z): (total rows) x (coef dim).
inline DenseMatrix all_rows_jacobian(const RowShape& sh, std::size_t coef_dim, const DenseVector& theta,
                                     const DenseVector& z) {
  const std::size_t k = sh.k;
  const std::size_t m_in = sh.m_in;
  const std::size_t m_eq = sh.m_eq;
  DenseMatrix jac(m_in + m_eq + k, coef_dim, 0.0);
  if (sh.kind == ProgramKind::Lp) {
    const std::size_t m = m_in;
    // primal block: (theta' (x) I_m, -I_m, 0)
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) jac(i, j * m + i) = theta[j];
      jac(i, m * k + i) = -1.0;
    }
    // dual block: (I_k (x) lambda', 0, -I_k)
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < m; ++i) jac(m + j, j * m + i) = z[i];
      jac(m + j, m * k + m + j) = -1.0;
    }
    return jac;
  }
  const QpLayout L(k, m_in, m_eq);
  for (std::size_t i = 0; i < m_in; ++i) {
    for (std::size_t j = 0; j < k; ++j) jac(i, L.a_ineq_at(i, j)) = theta[j];
    jac(i, L.b_ineq + i) = -1.0;
  }
  for (std::size_t q = 0; q < m_eq; ++q) {
    for (std::size_t j = 0; j < k; ++j) jac(m_in + q, L.a_eq_at(q, j)) = theta[j];
    jac(m_in + q, L.b_eq + q) = -1.0;
  }
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t r = m_in + m_eq + j;
    for (std::size_t l = 0; l < k; ++l) jac(r, L.q_at(j, l)) = -theta[l];
    for (std::size_t i = 0; i < m_in; ++i) jac(r, L.a_ineq_at(i, j)) = z[i];
    for (std::size_t q = 0; q < m_eq; ++q) jac(r, L.a_eq_at(q, j)) = z[m_in + q];
    jac(r, L.c + j) = -1.0;
  }
  return jac;
}

inline void route_rows(KktSystem& sys, const EstimatedCoefficients& est) {
  const RowShape sh = shape_of(sys);
  for (std::size_t r = 0; r < sys.total_rows(); ++r) {
    bool stochastic = false;
    for (std::size_t idx : row_coefficients(sh, r))
      if (est.stochastic_mask[idx]) stochastic = true;
    (stochastic ? sys.moment_rows : sys.constraint_rows).push_back(r);
  }
  sys.df = sys.moment_rows.size();
  sys.stochastic_columns = est.stochastic_indices();
  if (sys.df == 0) throw EmptyMoments("no optimality row involves an estimated coefficient");
}

inline void add_pairs(KktSystem& sys) {
  for (std::size_t i = 0; i < sys.m_in; ++i)
    sys.complementarity_pairs.push_back({i, {SlackRef::Kind::Nuisance, sys.slack_offset() + i}});
  if (sys.nonneg)
    for (std::size_t j = 0; j < sys.k; ++j)
      sys.complementarity_pairs.push_back({sys.m_in + sys.m_eq + j, {SlackRef::Kind::Theta, j}});
  for (std::size_t q = 0; q < sys.m_eq; ++q) sys.equality_multiplier_indices.push_back(sys.m_in + q);
}

}  // namespace detail

/// Moment system for max c'theta s.t. A theta <= b [theta >= 0].
inline KktSystem build_lp_system(const LpProblem& p, const EstimatedCoefficients& est) {
  p.validate();
  est.validate();
  KktSystem sys;
  sys.kind = ProgramKind::Lp;
  sys.k = p.dim();
  sys.m_in = p.rows();
  sys.nonneg = p.nonneg;
  sys.coef_dim = sys.m_in * sys.k + sys.m_in + sys.k;
  if (est.dim() != sys.coef_dim)
    throw DimensionMismatch("build_lp_system: stacked coefficient length " + std::to_string(est.dim()) +
                            " != " + std::to_string(sys.coef_dim));
  detail::route_rows(sys, est);
  detail::add_pairs(sys);
  try {
    const LpSolution sol = solve_lp(unstack_lp(p, est.point));
    if (sol.status == SolveStatus::Optimal) {
      DenseVector mult = sol.lambda;
      if (p.nonneg) {
        DenseVector sign = sol.sign_lambda;
        for (double& v : sign) v = std::max(v, 0.0);
        mult = concat(mult, sign);
      }
      DenseVector s = sol.slack;
      for (double& v : s) v = std::max(v, 0.0);
      sys.warm_start = concat(mult, s);
    }
  } catch (const Error&) {
  }
  return sys;
}

/// Moment system for min c'theta + 1/2 theta'Q theta s.t. A_ineq theta >= b_ineq,
/// A_eq theta = b_eq [theta >= 0].
inline KktSystem build_qp_system(QpProblem p, const EstimatedCoefficients& est) {
  p.normalize();
  p.validate(false);
  est.validate();
  KktSystem sys;
  sys.kind = ProgramKind::Qp;
  sys.k = p.dim();
  sys.m_in = p.ineq_rows();
  sys.m_eq = p.eq_rows();
  sys.nonneg = p.nonneg;
  sys.coef_dim = QpLayout(sys.k, sys.m_in, sys.m_eq).total;
  if (est.dim() != sys.coef_dim)
    throw DimensionMismatch("build_qp_system: stacked coefficient length " + std::to_string(est.dim()) +
                            " != " + std::to_string(sys.coef_dim));
  detail::route_rows(sys, est);
  detail::add_pairs(sys);
  try {
    const QpProblem sample = unstack_qp(p, est.point);
    const QpSolution sol = solve_qp(sample);
    if (sol.status == SolveStatus::Optimal) {
      DenseVector mult = concat(sol.lambda_ineq, sol.lambda_eq);
      if (p.nonneg) mult = concat(mult, sol.lambda_sign);
      DenseVector s = sol.slack;
      for (double& v : s) v = std::max(v, 0.0);
      sys.warm_start = concat(mult, s);
    }
  } catch (const Error&) {
  }
  return sys;
}

/// Packs multipliers and slacks into the nuisance vector z.
inline DenseVector pack_nuisance(const KktSystem& sys, const DenseVector& lambda, const DenseVector& s) {
  if (lambda.size() != sys.multiplier_count())
    throw DimensionMismatch("nuisance: expected " + std::to_string(sys.multiplier_count()) + " multipliers");
  if (s.size() != sys.slack_count())
    throw DimensionMismatch("nuisance: expected " + std::to_string(sys.slack_count()) + " slacks");
  return concat(lambda, s);
}

/// All optimality rows (moments and constraints) at the point estimate.
inline DenseVector eval_all_rows(const KktSystem& sys, const DenseVector& beta, const DenseVector& theta,
                                 const DenseVector& z) {
  if (theta.size() != sys.k) throw DimensionMismatch("eval: theta length mismatch");
  if (z.size() != sys.nuisance_dim()) throw DimensionMismatch("eval: nuisance length mismatch");
  if (beta.size() != sys.coef_dim) throw DimensionMismatch("eval: coefficient length mismatch");
  return detail::all_rows(detail::shape_of(sys), beta, theta, z);
}

/// Full Jacobian with respect to the stacked coefficients (all rows, all columns).
inline DenseMatrix eval_full_jacobian(const KktSystem& sys, const DenseVector& theta, const DenseVector& z) {
  if (theta.size() != sys.k) throw DimensionMismatch("eval: theta length mismatch");
  if (z.size() != sys.nuisance_dim()) throw DimensionMismatch("eval: nuisance length mismatch");
  return detail::all_rows_jacobian(detail::shape_of(sys), sys.coef_dim, theta, z);
}

struct MomentEval {
  DenseVector g;  ///< moment rows
  DenseMatrix G;  ///< d g / d(stochastic coefficients)
};

inline MomentEval eval_moments(const KktSystem& sys, const EstimatedCoefficients& est, const DenseVector& theta,
                               const DenseVector& lambda, const DenseVector& s) {
  const DenseVector z = pack_nuisance(sys, lambda, s);
  const DenseVector rows = eval_all_rows(sys, est.point, theta, z);
  const DenseMatrix jac = eval_full_jacobian(sys, theta, z);
  return {select(rows, sys.moment_rows), select(jac, sys.moment_rows, sys.stochastic_columns)};
}

}  // namespace mpinfer
