/**
 * @file mpcc.hpp
 * @brief Profiled test statistic under complementarity constraints.
 *
 * For fixed theta the statistic is
 *
 *     min  n g(z)' (G(z) V G(z)')^{-1} g(z)
 *     over nuisance z = (multipliers, slacks) with sign restrictions,
 *     the deterministic optimality rows holding exactly, and
 *     0 <= lambda_i  _|_  s_i >= 0 for every complementarity pair.
 *
 * Complementarity is handled exactly by enumerating pieces (for each pair,
 * which side is zero). Pairs whose slack is a theta component are resolved
 * by theta itself: theta_j > 0 forces the multiplier to zero.
 *
 * Inside a piece g is affine in z, but the weight depends on the
 * multipliers through G. Each piece is solved by iterated reweighting
 * (freeze W, solve the convex QP, update) from two starts, followed by a
 * projected Gauss-Newton polish on the exact objective whenever the weight
 * actually depends on a free multiplier.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"
#include "mpinfer/kkt.hpp"
#include "mpinfer/qp.hpp"

namespace mpinfer {

struct ProfileOptions {
  std::size_t max_sweeps = 100;
  double sweep_tol = 1e-10;
  bool polish = true;
  std::size_t max_polish = 60;
  /// Extra starting points for the nuisance vector (full z layout).
  std::vector<DenseVector> extra_starts;
};

struct ProfileResult {
  double statistic = std::numeric_limits<double>::infinity();
  DenseVector lambda_star;
  DenseVector s_star;
  std::vector<bool> piece;  ///< per enumerated pair: true = multiplier side is zero
  std::size_t iterations = 0;
  bool converged = true;
  std::size_t feasible_pieces = 0;
};

struct PieceResult {
  bool feasible = false;
  double value = std::numeric_limits<double>::infinity();
  DenseVector lambda;
  DenseVector s;
  std::size_t iterations = 0;
  bool converged = true;
};

/// A frozen-weight piece: min (M y + h)' W (M y + h) s.t. E y = e, y_i >= 0
/// where sign[i]. Exact convex QP.
struct FrozenPiece {
  DenseMatrix M;
  DenseVector h;
  DenseMatrix W;
  DenseMatrix E;
  DenseVector e;
  std::vector<bool> sign;
};

struct FrozenSolution {
  bool feasible = false;
  DenseVector y;
  double value = std::numeric_limits<double>::infinity();  ///< g'Wg, no n factor
};

inline FrozenSolution solve_frozen_piece(const FrozenPiece& fp) {
  const std::size_t f = fp.M.cols();
  FrozenSolution out;
  if (f == 0) {
    for (std::size_t r = 0; r < fp.e.size(); ++r)
      if (std::abs(fp.e[r]) > 1e-9 * (1.0 + std::abs(fp.e[r]))) return out;
    out.feasible = true;
    out.y = DenseVector();
    out.value = dot(fp.h, fp.W * fp.h);
    return out;
  }
  const DenseMatrix wm = fp.W * fp.M;
  const DenseMatrix mt = fp.M.transpose();
  DenseMatrix q = 2.0 * (mt * wm);
  DenseVector c = 2.0 * (mt * (fp.W * fp.h));
  const double scale = std::max(max_abs(q), norm_inf(c));
  if (scale > 0.0) {
    q = (1.0 / scale) * q;
    c = (1.0 / scale) * c;
  }
  q = symmetrize(q);

  QpProblem p;
  p.Q = q;
  p.c = c;
  std::vector<std::size_t> signed_idx;
  for (std::size_t i = 0; i < f; ++i)
    if (fp.sign[i]) signed_idx.push_back(i);
  p.A_ineq = DenseMatrix(signed_idx.size(), f);
  for (std::size_t r = 0; r < signed_idx.size(); ++r) p.A_ineq(r, signed_idx[r]) = 1.0;
  p.b_ineq = DenseVector(signed_idx.size(), 0.0);
  // Drop equality rows that no free variable touches; they must already hold.
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < fp.E.rows(); ++r) {
    double rn = 0.0;
    for (double v : fp.E.row(r)) rn = std::max(rn, std::abs(v));
    if (rn > 0.0) {
      keep.push_back(r);
    } else if (std::abs(fp.e[r]) > 1e-9 * (1.0 + std::abs(fp.e[r]))) {
      return out;
    }
  }
  p.A_eq = keep.empty() ? DenseMatrix(0, f) : select_rows(fp.E, keep);
  p.b_eq = select(fp.e, keep);

  QpOptions opts;
  opts.check_psd = false;
  QpSolution sol = solve_qp(p, opts);
  if (sol.status == SolveStatus::MaxIterations) {
    // Degenerate cycling: retry once with a tiny deterministic jitter.
    QpProblem jittered = p;
    for (std::size_t r = 0; r < jittered.b_eq.size(); ++r) jittered.b_eq[r] += 1e-9 * (1.0 + 0.1 * r);
    sol = solve_qp(jittered, opts);
  }
  if (sol.status != SolveStatus::Optimal) return out;
  out.feasible = true;
  out.y = sol.theta;
  for (std::size_t i = 0; i < f; ++i)
    if (fp.sign[i]) out.y[i] = std::max(out.y[i], 0.0);
  const DenseVector g = fp.M * out.y + fp.h;
  out.value = dot(g, fp.W * g);
  return out;
}

namespace detail {

struct Weight {
  DenseMatrix W;
  DenseMatrix G;
  bool degenerate = false;
};

struct ProfileContext {
  const KktSystem* sys = nullptr;
  double n = 1.0;
  std::size_t nz = 0;
  DenseMatrix M;  // moment rows x nz
  DenseVector h;
  DenseMatrix E;  // constraint rows x nz; E z = e
  DenseVector e;
  DenseMatrix G0;               // moment rows x stochastic cols at z = 0
  std::vector<DenseMatrix> Gi;  // dG/dz_i (empty matrix when zero)
  std::vector<bool> g_depends;
  DenseMatrix V;
  std::vector<bool> sign;
  std::vector<bool> forced_zero;
  std::vector<ComplementarityPair> enumerated;
};

inline ProfileContext make_context(const KktSystem& sys, const EstimatedCoefficients& est,
                                   const DenseVector& theta) {
  if (theta.size() != sys.k) throw DimensionMismatch("profile: theta length mismatch");
  if (est.dim() != sys.coef_dim) throw DimensionMismatch("profile: coefficient length mismatch");
  ProfileContext ctx;
  ctx.sys = &sys;
  ctx.n = est.n;
  ctx.nz = sys.nuisance_dim();
  const std::size_t nz = ctx.nz;
  const DenseVector zero(nz, 0.0);
  const DenseVector rows0 = eval_all_rows(sys, est.point, theta, zero);
  const DenseMatrix jac0 = eval_full_jacobian(sys, theta, zero);
  DenseMatrix m_all(sys.total_rows(), nz);
  ctx.Gi.resize(nz);
  ctx.g_depends.assign(nz, false);
  ctx.G0 = select(jac0, sys.moment_rows, sys.stochastic_columns);
  DenseVector unit(nz, 0.0);
  for (std::size_t i = 0; i < nz; ++i) {
    unit[i] = 1.0;
    const DenseVector rows1 = eval_all_rows(sys, est.point, theta, unit);
    for (std::size_t r = 0; r < sys.total_rows(); ++r) m_all(r, i) = rows1[r] - rows0[r];
    if (i < sys.multiplier_count()) {
      const DenseMatrix jac1 = eval_full_jacobian(sys, theta, unit);
      DenseMatrix gi = select(jac1, sys.moment_rows, sys.stochastic_columns) - ctx.G0;
      if (max_abs(gi) > 0.0) {
        ctx.Gi[i] = std::move(gi);
        ctx.g_depends[i] = true;
      }
    }
    unit[i] = 0.0;
  }
  ctx.M = select_rows(m_all, sys.moment_rows);
  ctx.h = select(rows0, sys.moment_rows);
  ctx.E = select_rows(m_all, sys.constraint_rows);
  ctx.e = -1.0 * select(rows0, sys.constraint_rows);
  for (std::size_t r = 0; r < ctx.E.rows(); ++r) {
    double rn = 0.0;
    for (double v : ctx.E.row(r)) rn = std::max(rn, std::abs(v));
    if (rn == 0.0 && std::abs(ctx.e[r]) > 1e-9 * (1.0 + std::abs(ctx.e[r]))) {
      throw PreconditionError("theta violates deterministic constraint " +
                              sys.row_label(sys.constraint_rows[r]) + " by " + std::to_string(-ctx.e[r]));
    }
  }
  ctx.V = select(est.V_hat, sys.stochastic_columns, sys.stochastic_columns);
  ctx.sign = sys.sign_restricted();
  ctx.forced_zero.assign(nz, false);
  for (const auto& pr : sys.complementarity_pairs) {
    if (pr.slack.kind == SlackRef::Kind::Theta) {
      const double t = theta[pr.slack.index];
      if (t < -1e-9) throw PreconditionError("theta must be nonnegative for sign-constrained programs");
      if (t > 1e-12) ctx.forced_zero[pr.multiplier] = true;
    } else {
      ctx.enumerated.push_back(pr);
    }
  }
  return ctx;
}

inline DenseMatrix jacobian_at(const ProfileContext& ctx, const DenseVector& z) {
  DenseMatrix g = ctx.G0;
  for (std::size_t i = 0; i < ctx.nz; ++i) {
    if (!ctx.g_depends[i] || z[i] == 0.0) continue;
    const DenseMatrix& gi = ctx.Gi[i];
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) += z[i] * gi(r, c);
  }
  return g;
}

inline Weight weight_at(const ProfileContext& ctx, const DenseVector& z) {
  Weight w;
  w.G = jacobian_at(ctx, z);
  const DenseMatrix s = symmetrize(w.G * ctx.V * w.G.transpose());
  // Equilibrate first: dual rows scale with the multipliers, and a large
  // multiplier would otherwise push the primal block under the pivot floor.
  const std::size_t q = s.rows();
  DenseVector d(q, 1.0);
  for (std::size_t i = 0; i < q; ++i)
    if (s(i, i) > 0.0) d[i] = std::sqrt(s(i, i));
  DenseMatrix scaled = s;
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < q; ++j) scaled(i, j) /= d[i] * d[j];
  try {
    w.W = sym_pinv_with_fallback(scaled);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < q; ++j) w.W(i, j) /= d[i] * d[j];
  } catch (const NotPositiveDefinite&) {
    w.W = DenseMatrix::identity(s.rows());
    w.degenerate = true;
  }
  return w;
}

inline double value_with(const ProfileContext& ctx, const Weight& w, const DenseVector& g) {
  if (w.degenerate) {
    const double tol = 1e-9 * (1.0 + norm_inf(ctx.h));
    return norm_inf(g) <= tol ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::max(0.0, ctx.n * dot(g, w.W * g));
}

inline double value_at(const ProfileContext& ctx, const DenseVector& z) {
  const Weight w = weight_at(ctx, z);
  return value_with(ctx, w, ctx.M * z + ctx.h);
}

struct PieceSpace {
  std::vector<std::size_t> free;  // indices into z
  std::vector<bool> free_sign;
};

inline PieceSpace piece_space(const ProfileContext& ctx, const std::vector<bool>& piece) {
  std::vector<bool> zeroed = ctx.forced_zero;
  for (std::size_t p = 0; p < ctx.enumerated.size(); ++p) {
    const auto& pr = ctx.enumerated[p];
    zeroed[piece[p] ? pr.multiplier : pr.slack.index] = true;
  }
  PieceSpace ps;
  for (std::size_t i = 0; i < ctx.nz; ++i) {
    if (zeroed[i]) continue;
    ps.free.push_back(i);
    ps.free_sign.push_back(ctx.sign[i]);
  }
  return ps;
}

inline DenseVector embed(const ProfileContext& ctx, const PieceSpace& ps, const DenseVector& y) {
  DenseVector z(ctx.nz, 0.0);
  for (std::size_t a = 0; a < ps.free.size(); ++a) z[ps.free[a]] = y[a];
  return z;
}

inline DenseVector restrict_start(const PieceSpace& ps, const DenseVector& z) {
  DenseVector y(ps.free.size());
  for (std::size_t a = 0; a < ps.free.size(); ++a) y[a] = ps.free_sign[a] ? std::max(0.0, z[ps.free[a]]) : z[ps.free[a]];
  return y;
}

/// Gradient of the exact objective with respect to the free coordinates.
inline DenseVector objective_gradient(const ProfileContext& ctx, const PieceSpace& ps, const DenseVector& z,
                                      const Weight& w) {
  const DenseVector g = ctx.M * z + ctx.h;
  const DenseVector wg = w.W * g;
  const DenseMatrix vgt = ctx.V * w.G.transpose();
  DenseVector grad(ps.free.size());
  for (std::size_t a = 0; a < ps.free.size(); ++a) {
    const std::size_t i = ps.free[a];
    double val = 2.0 * dot(ctx.M.col_copy(i), wg);
    if (ctx.g_depends[i]) {
      // d S / d z_i = Gi V G' + G V Gi'
      const DenseMatrix ds = ctx.Gi[i] * vgt;
      double quad = 0.0;
      const DenseVector t = ds * wg;
      quad = 2.0 * dot(wg, t);
      val -= quad;
    }
    grad[a] = ctx.n * val;
  }
  return grad;
}

inline FrozenPiece frozen_problem(const ProfileContext& ctx, const PieceSpace& ps, const DenseMatrix& W) {
  FrozenPiece fp;
  fp.M = select_cols(ctx.M, ps.free);
  fp.h = ctx.h;
  fp.W = W;
  fp.E = select_cols(ctx.E, ps.free);
  fp.e = ctx.e;
  fp.sign = ps.free_sign;
  return fp;
}

struct PieceState {
  DenseVector z;
  double value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = true;
  bool feasible = false;
};

inline PieceState run_from_start(const ProfileContext& ctx, const PieceSpace& ps, const DenseVector& start,
                                 const ProfileOptions& opts) {
  PieceState st;
  bool weight_varies = false;
  for (std::size_t i : ps.free)
    if (ctx.g_depends[i]) weight_varies = true;

  DenseVector zcur = embed(ctx, ps, restrict_start(ps, start));
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    const Weight w = weight_at(ctx, zcur);
    const FrozenSolution fs = solve_frozen_piece(frozen_problem(ctx, ps, w.W));
    ++st.iterations;
    if (!fs.feasible) {
      if (!st.feasible) return st;
      st.converged = false;
      break;
    }
    const DenseVector znew = embed(ctx, ps, fs.y);
    const double val = value_at(ctx, znew);
    if (val < st.value || !st.feasible) {
      st.value = val;
      st.z = znew;
    }
    st.feasible = true;
    if (!weight_varies) break;
    if (std::abs(val - prev) < opts.sweep_tol * std::max(1.0, std::abs(val))) break;
    if (sweep + 1 == opts.max_sweeps) st.converged = false;
    prev = val;
    zcur = znew;
  }
  if (!weight_varies || !opts.polish || !std::isfinite(st.value)) return st;

  // Projected Gauss-Newton polish on the exact objective.
  DenseVector z = st.z;
  double fz = st.value;
  for (std::size_t it = 0; it < opts.max_polish; ++it) {
    const Weight w = weight_at(ctx, z);
    if (w.degenerate) break;
    const DenseVector grad = objective_gradient(ctx, ps, z, w);
    const DenseMatrix mf = select_cols(ctx.M, ps.free);
    DenseMatrix hess = (2.0 * ctx.n) * (mf.transpose() * (w.W * mf));
    const std::size_t f = ps.free.size();
    double tr = 0.0;
    for (std::size_t a = 0; a < f; ++a) tr += hess(a, a);
    const double tau = 1e-6 * std::max(1e-12, tr / static_cast<double>(std::max<std::size_t>(f, 1)));
    for (std::size_t a = 0; a < f; ++a) hess(a, a) += tau;

    QpProblem step;
    const double scale = std::max(max_abs(hess), 1e-300);
    step.Q = symmetrize((1.0 / scale) * hess);
    step.c = (1.0 / scale) * grad;
    const DenseVector y = restrict_start(ps, z);
    std::vector<std::size_t> signed_idx;
    for (std::size_t a = 0; a < f; ++a)
      if (ps.free_sign[a]) signed_idx.push_back(a);
    step.A_ineq = DenseMatrix(signed_idx.size(), f);
    step.b_ineq = DenseVector(signed_idx.size());
    for (std::size_t r = 0; r < signed_idx.size(); ++r) {
      step.A_ineq(r, signed_idx[r]) = 1.0;
      step.b_ineq[r] = -y[signed_idx[r]];
    }
    const DenseMatrix ef = select_cols(ctx.E, ps.free);
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < ef.rows(); ++r) {
      double rn = 0.0;
      for (double v : ef.row(r)) rn = std::max(rn, std::abs(v));
      if (rn > 0.0) keep.push_back(r);
    }
    step.A_eq = keep.empty() ? DenseMatrix(0, f) : select_rows(ef, keep);
    step.b_eq = DenseVector(keep.size(), 0.0);
    QpOptions qo;
    qo.check_psd = false;
    const QpSolution sol = solve_qp(step, qo);
    ++st.iterations;
    if (sol.status != SolveStatus::Optimal) break;
    const DenseVector d = sol.theta;
    const double slope = dot(grad, d);
    if (!(slope < -1e-14 * std::max(1.0, fz))) break;
    double t = 1.0;
    bool accepted = false;
    DenseVector ztry;
    double ftry = fz;
    for (int ls = 0; ls < 40; ++ls) {
      DenseVector ynew(f);
      for (std::size_t a = 0; a < f; ++a) {
        ynew[a] = y[a] + t * d[a];
        if (ps.free_sign[a]) ynew[a] = std::max(0.0, ynew[a]);
      }
      ztry = embed(ctx, ps, ynew);
      ftry = value_at(ctx, ztry);
      if (ftry <= fz + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    const double gain = fz - ftry;
    z = ztry;
    fz = ftry;
    if (gain < 1e-12 * std::max(1.0, fz)) break;
  }
  if (fz < st.value) {
    st.value = fz;
    st.z = z;
  }
  return st;
}

inline PieceResult minimize_piece_ctx(const ProfileContext& ctx, const std::vector<bool>& piece,
                                      const ProfileOptions& opts) {
  const PieceSpace ps = piece_space(ctx, piece);
  std::vector<DenseVector> starts{DenseVector(ctx.nz, 0.0)};
  if (ctx.sys->warm_start) starts.push_back(*ctx.sys->warm_start);
  for (const auto& s : opts.extra_starts)
    if (s.size() == ctx.nz) starts.push_back(s);

  PieceResult best;
  for (const auto& start : starts) {
    const PieceState st = run_from_start(ctx, ps, start, opts);
    best.iterations += st.iterations;
    if (!st.feasible) continue;
    if (!best.feasible || st.value < best.value) {
      best.feasible = true;
      best.value = st.value;
      best.converged = st.converged;
      best.lambda = DenseVector(std::vector<double>(st.z.begin(), st.z.begin() + static_cast<std::ptrdiff_t>(
                                                                                    ctx.sys->multiplier_count())));
      best.s = DenseVector(std::vector<double>(st.z.begin() + static_cast<std::ptrdiff_t>(ctx.sys->multiplier_count()),
                                               st.z.end()));
    }
    // Without weight dependence every start lands on the same convex problem.
    bool weight_varies = false;
    for (std::size_t i : ps.free)
      if (ctx.g_depends[i]) weight_varies = true;
    if (!weight_varies) break;
  }
  return best;
}

}  // namespace detail

/// Minimizes the statistic over one complementarity piece.
/// `piece[p]` = true zeroes the multiplier of enumerated pair p, false its slack.
inline PieceResult minimize_piece(const KktSystem& sys, const EstimatedCoefficients& est, const DenseVector& theta,
                                  const std::vector<bool>& piece, const ProfileOptions& opts = {}) {
  const detail::ProfileContext ctx = detail::make_context(sys, est, theta);
  if (piece.size() != ctx.enumerated.size())
    throw DimensionMismatch("minimize_piece: piece has " + std::to_string(piece.size()) + " entries, expected " +
                            std::to_string(ctx.enumerated.size()));
  return detail::minimize_piece_ctx(ctx, piece, opts);
}

/// Number of complementarity pairs that require enumeration at this theta.
inline std::size_t enumerated_pair_count(const KktSystem& sys) {
  std::size_t c = 0;
  for (const auto& pr : sys.complementarity_pairs)
    if (pr.slack.kind == SlackRef::Kind::Nuisance) ++c;
  return c;
}

inline ProfileResult profile_statistic(const KktSystem& sys, const EstimatedCoefficients& est,
                                       const DenseVector& theta, const ProfileOptions& opts = {}) {
  const std::size_t pairs = enumerated_pair_count(sys);
  if (pairs > 20) throw PieceLimitExceeded("profile_statistic: " + std::to_string(pairs) + " pairs > 20");
  const detail::ProfileContext ctx = detail::make_context(sys, est, theta);
  ProfileResult best;
  const std::size_t count = std::size_t{1} << pairs;
  std::vector<bool> piece(pairs);
  for (std::size_t mask = 0; mask < count; ++mask) {
    for (std::size_t p = 0; p < pairs; ++p) piece[p] = ((mask >> p) & 1U) != 0;
    const PieceResult pr = detail::minimize_piece_ctx(ctx, piece, opts);
    best.iterations += pr.iterations;
    if (!pr.feasible) continue;
    ++best.feasible_pieces;
    if (pr.value < best.statistic || best.feasible_pieces == 1) {
      best.statistic = pr.value;
      best.lambda_star = pr.lambda;
      best.s_star = pr.s;
      best.piece = piece;
      best.converged = pr.converged;
    }
  }
  if (best.feasible_pieces == 0)
    throw NoFeasiblePiece("profile_statistic: no complementarity piece satisfies the deterministic constraints");
  return best;
}

}  // namespace mpinfer
