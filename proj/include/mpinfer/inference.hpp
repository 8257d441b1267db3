/**
 * @file inference.hpp
 * @brief Confidence sets by test inversion: membership, grid scans and
 *        projection intervals.
 *
 * A point theta is accepted when its profiled statistic does not exceed the
 * chi-square critical value with df equal to the number of moment rows.
 * Two lattices are supported: a plain box lattice, and the unit simplex
 * (1'theta = 1, theta >= 0) where every point is i / N exactly.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"
#include "mpinfer/kkt.hpp"
#include "mpinfer/mpcc.hpp"
#include "mpinfer/parallel.hpp"
#include "mpinfer/stats.hpp"

namespace mpinfer {

/// a'theta >= b
struct LinearInequality {
  DenseVector a;
  double b = 0.0;
};

struct ThetaConstraints {
  bool nonneg = false;
  bool simplex = false;  ///< 1'theta = 1 together with theta >= 0
  std::vector<LinearInequality> inequalities;

  /// Empty string when theta satisfies everything to `tol`, otherwise a reason.
  std::string violation(const DenseVector& theta, double tol = 1e-9) const {
    if (nonneg || simplex)
      for (std::size_t j = 0; j < theta.size(); ++j)
        if (theta[j] < -tol) return "theta[" + std::to_string(j) + "] < 0";
    if (simplex) {
      double s = 0.0;
      for (double v : theta) s += v;
      if (std::abs(s - 1.0) > tol) return "weights do not sum to 1";
    }
    for (std::size_t r = 0; r < inequalities.size(); ++r) {
      const auto& q = inequalities[r];
      if (q.a.size() != theta.size()) throw DimensionMismatch("theta inequality has wrong length");
      if (dot(q.a, theta) < q.b - tol) return "theta inequality " + std::to_string(r) + " violated";
    }
    return {};
  }
};

struct ConfidenceSpec {
  double alpha = 0.05;
  std::size_t df = 0;  ///< 0 means: use the system's df
  DenseVector lower;
  DenseVector upper;
  double grid_step = 0.01;
  ThetaConstraints constraints;
  std::size_t threads = 0;
  ProfileOptions profile;

  void validate(std::size_t k) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
    if (!(grid_step > 0.0)) throw PreconditionError("grid_step must be positive");
    if (lower.size() != k || upper.size() != k) throw DimensionMismatch("theta box must have one bound per coordinate");
    for (std::size_t j = 0; j < k; ++j)
      if (!(lower[j] < upper[j])) throw PreconditionError("theta box lower must be < upper in coordinate " + std::to_string(j));
  }
};

inline std::size_t effective_df(const KktSystem& sys, const ConfidenceSpec& spec) {
  return spec.df == 0 ? sys.df : spec.df;
}

inline double critical_value(const KktSystem& sys, const ConfidenceSpec& spec) {
  return chi2_quantile(effective_df(sys, spec), 1.0 - spec.alpha);
}

struct MemberResult {
  bool accepted = false;
  double statistic = 0.0;
};

namespace detail {

inline void check_inside(const ConfidenceSpec& spec, const DenseVector& theta) {
  const std::size_t k = theta.size();
  if (spec.lower.size() != k || spec.upper.size() != k) throw DimensionMismatch("member: theta box dimension");
  for (std::size_t j = 0; j < k; ++j) {
    const double tol = 1e-9 * std::max(1.0, std::abs(spec.upper[j] - spec.lower[j]));
    if (theta[j] < spec.lower[j] - tol || theta[j] > spec.upper[j] + tol)
      throw PreconditionError("theta[" + std::to_string(j) + "] outside the search box");
  }
  const std::string why = spec.constraints.violation(theta);
  if (!why.empty()) throw PreconditionError("theta violates constraints: " + why);
}

}  // namespace detail

inline MemberResult member(const KktSystem& sys, const EstimatedCoefficients& est, const ConfidenceSpec& spec,
                           const DenseVector& theta) {
  detail::check_inside(spec, theta);
  const double cv = critical_value(sys, spec);
  const ProfileResult pr = profile_statistic(sys, est, theta, spec.profile);
  return {pr.statistic <= cv, pr.statistic};
}

struct GridPoint {
  DenseVector theta;
  std::vector<std::int64_t> cell;  ///< integer lattice coordinates
  double statistic = 0.0;
  bool accepted = false;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct ConfidenceSet {
  std::vector<GridPoint> points;  ///< every evaluated lattice point, lexicographic cell order
  double critical_value = 0.0;
  double alpha = 0.0;
  std::size_t df = 0;
  bool simplex_lattice = false;
  std::vector<Interval> projection;  ///< empty when nothing is accepted

  std::size_t accepted_count() const {
    std::size_t c = 0;
    for (const auto& p : points) c += p.accepted ? 1 : 0;
    return c;
  }
  std::vector<GridPoint> accepted() const {
    std::vector<GridPoint> out;
    for (const auto& p : points)
      if (p.accepted) out.push_back(p);
    return out;
  }
  double min_statistic() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : points) m = std::min(m, p.statistic);
    return m;
  }
};

namespace detail {

inline constexpr double kMaxGridPoints = 1e7;

inline std::int64_t simplex_divisions(double step) {
  const double inv = 1.0 / step;
  const double r = std::round(inv);
  if (r < 1.0 || std::abs(inv - r) > 1e-6 * r)
    throw PreconditionError("simplex grids need 1/grid_step to be an integer");
  return static_cast<std::int64_t>(r);
}

inline double binomial(std::int64_t n, std::int64_t r) {
  double out = 1.0;
  for (std::int64_t i = 1; i <= r; ++i) out = out * static_cast<double>(n - r + i) / static_cast<double>(i);
  return out;
}

/// Cells of the simplex lattice: compositions of N into k nonnegative parts,
/// in lexicographic order.
inline void simplex_cells(std::size_t k, std::int64_t total, std::vector<std::int64_t>& cur,
                          std::vector<std::vector<std::int64_t>>& out) {
  const std::size_t j = cur.size();
  if (j + 1 == k) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (std::int64_t v = 0; v <= total; ++v) {
    cur.push_back(v);
    simplex_cells(k, total - v, cur, out);
    cur.pop_back();
  }
}

inline std::vector<std::int64_t> box_counts(const ConfidenceSpec& spec) {
  std::vector<std::int64_t> counts(spec.lower.size());
  for (std::size_t j = 0; j < counts.size(); ++j)
    counts[j] = static_cast<std::int64_t>(std::floor((spec.upper[j] - spec.lower[j]) / spec.grid_step + 1e-9)) + 1;
  return counts;
}

inline bool in_box(const ConfidenceSpec& spec, const DenseVector& theta) {
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double tol = 1e-9 * std::max(1.0, std::abs(spec.upper[j] - spec.lower[j]));
    if (theta[j] < spec.lower[j] - tol || theta[j] > spec.upper[j] + tol) return false;
  }
  return true;
}

/// Lattice points (theta, cell) admitted by the box and the constraints.
inline std::vector<GridPoint> lattice(const ConfidenceSpec& spec, std::size_t k) {
  std::vector<GridPoint> pts;
  if (spec.constraints.simplex) {
    const std::int64_t n_div = simplex_divisions(spec.grid_step);
    if (binomial(n_div + static_cast<std::int64_t>(k) - 1, static_cast<std::int64_t>(k) - 1) > kMaxGridPoints)
      throw GridTooLarge("simplex lattice exceeds 1e7 points");
    std::vector<std::vector<std::int64_t>> cells;
    std::vector<std::int64_t> cur;
    simplex_cells(k, n_div, cur, cells);
    for (auto& cell : cells) {
      DenseVector th(k);
      for (std::size_t j = 0; j < k; ++j) th[j] = static_cast<double>(cell[j]) / static_cast<double>(n_div);
      if (!in_box(spec, th) || !spec.constraints.violation(th).empty()) continue;
      pts.push_back({th, std::move(cell), 0.0, false});
    }
    return pts;
  }
  const std::vector<std::int64_t> counts = box_counts(spec);
  double total = 1.0;
  for (auto c : counts) total *= static_cast<double>(c);
  if (total > kMaxGridPoints) throw GridTooLarge("box lattice exceeds 1e7 points");
  std::vector<std::int64_t> cell(k, 0);
  for (;;) {
    DenseVector th(k);
    for (std::size_t j = 0; j < k; ++j) th[j] = spec.lower[j] + static_cast<double>(cell[j]) * spec.grid_step;
    if (spec.constraints.violation(th).empty()) pts.push_back({th, cell, 0.0, false});
    std::size_t j = k;
    while (j > 0) {
      --j;
      if (++cell[j] < counts[j]) break;
      cell[j] = 0;
      if (j == 0) return pts;
    }
  }
}

}  // namespace detail

/// Statistic used by grid and slice scans: a point that no nuisance value
/// can reconcile with the deterministic rows is rejected with +inf instead
/// of aborting the scan.
inline double scan_statistic(const KktSystem& sys, const EstimatedCoefficients& est, const DenseVector& theta,
                             const ProfileOptions& opts) {
  try {
    return profile_statistic(sys, est, theta, opts).statistic;
  } catch (const NoFeasiblePiece&) {
    return std::numeric_limits<double>::infinity();
  } catch (const PreconditionError&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// Evaluates a list of points in parallel and fills statistic / accepted.
inline void evaluate_points(const KktSystem& sys, const EstimatedCoefficients& est, const ConfidenceSpec& spec,
                            std::vector<GridPoint>& pts) {
  const double cv = critical_value(sys, spec);
  parallel_for(pts.size(), spec.threads, [&](std::size_t i) {
    pts[i].statistic = scan_statistic(sys, est, pts[i].theta, spec.profile);
    pts[i].accepted = pts[i].statistic <= cv;
  });
}

inline std::vector<Interval> envelope(const std::vector<GridPoint>& pts, std::size_t k) {
  std::vector<Interval> env;
  bool any = false;
  for (const auto& p : pts) {
    if (!p.accepted) continue;
    if (!any) {
      env.assign(k, Interval{});
      for (std::size_t j = 0; j < k; ++j) env[j] = {p.theta[j], p.theta[j]};
      any = true;
    }
    for (std::size_t j = 0; j < k; ++j) {
      env[j].lower = std::min(env[j].lower, p.theta[j]);
      env[j].upper = std::max(env[j].upper, p.theta[j]);
    }
  }
  return env;
}

inline ConfidenceSet grid_scan(const KktSystem& sys, const EstimatedCoefficients& est, const ConfidenceSpec& spec) {
  spec.validate(sys.k);
  ConfidenceSet cs;
  cs.alpha = spec.alpha;
  cs.df = effective_df(sys, spec);
  cs.critical_value = critical_value(sys, spec);
  cs.simplex_lattice = spec.constraints.simplex;
  cs.points = detail::lattice(spec, sys.k);
  evaluate_points(sys, est, spec, cs.points);
  cs.projection = envelope(cs.points, sys.k);
  return cs;
}

/// Lattice neighbours: +-1 in one coordinate (box) or one unit of mass moved
/// between two coordinates (simplex).
inline bool lattice_adjacent(const GridPoint& a, const GridPoint& b, bool simplex) {
  int plus = 0, minus = 0;
  for (std::size_t j = 0; j < a.cell.size(); ++j) {
    const std::int64_t d = a.cell[j] - b.cell[j];
    if (d == 0) continue;
    if (d == 1) {
      ++plus;
    } else if (d == -1) {
      ++minus;
    } else {
      return false;
    }
  }
  if (simplex) return plus == 1 && minus == 1;
  return plus + minus == 1;
}

/// Accepted points plus the rejected lattice neighbours bordering them.
inline std::vector<GridPoint> accepted_with_shell(const ConfidenceSet& cs) {
  std::set<std::vector<std::int64_t>> acc;
  for (const auto& p : cs.points)
    if (p.accepted) acc.insert(p.cell);
  std::vector<GridPoint> out;
  for (const auto& p : cs.points) {
    if (p.accepted) {
      out.push_back(p);
      continue;
    }
    bool border = false;
    const std::size_t k = p.cell.size();
    std::vector<std::int64_t> nb = p.cell;
    for (std::size_t a = 0; a < k && !border; ++a) {
      if (cs.simplex_lattice) {
        for (std::size_t b = 0; b < k && !border; ++b) {
          if (a == b) continue;
          nb = p.cell;
          ++nb[a];
          --nb[b];
          border = acc.count(nb) > 0;
        }
      } else {
        for (int d : {-1, 1}) {
          nb = p.cell;
          nb[a] += d;
          if (acc.count(nb)) border = true;
        }
      }
    }
    if (border) out.push_back(p);
  }
  return out;
}

namespace detail {

/// Candidate points on the slice theta_j = t for the projection search:
/// the accepted lattice points and their rejected shell with coordinate j
/// moved to t (on the simplex the other weights are rescaled to keep the
/// sum at one). Accepted points nearest the slice come first.
inline std::vector<DenseVector> slice_candidates(const ConfidenceSpec& spec, const ConfidenceSet& scan,
                                                 std::size_t k, std::size_t j, double t) {
  std::vector<GridPoint> src = accepted_with_shell(scan);
  std::stable_sort(src.begin(), src.end(), [&](const GridPoint& a, const GridPoint& b) {
    if (a.accepted != b.accepted) return a.accepted;
    return std::abs(a.theta[j] - t) < std::abs(b.theta[j] - t);
  });
  std::vector<DenseVector> out;
  std::set<std::vector<long long>> seen;
  auto admit = [&](DenseVector th) {
    th[j] = t;
    if (!in_box(spec, th) || !spec.constraints.violation(th, 1e-9).empty()) return;
    std::vector<long long> key(k);
    for (std::size_t q = 0; q < k; ++q) key[q] = std::llround(th[q] * 1e9);
    if (seen.insert(key).second) out.push_back(std::move(th));
  };
  for (const auto& p : src) {
    if (!spec.constraints.simplex) {
      admit(p.theta);
      continue;
    }
    const double rest = 1.0 - t;
    if (rest < -1e-12) return out;
    double other = 0.0;
    for (std::size_t q = 0; q < k; ++q)
      if (q != j) other += p.theta[q];
    DenseVector th(k, 0.0);
    if (other <= 0.0) {
      if (k == 1) admit(th);
      continue;
    }
    for (std::size_t q = 0; q < k; ++q)
      if (q != j) th[q] = std::max(0.0, rest) * p.theta[q] / other;
    admit(th);
  }
  return out;
}

}  // namespace detail

/// Projection interval for coordinate j, refined by bisection on the slice
/// predicate "some theta with theta_j = t is accepted" until the bracket is
/// at most grid_step / 10 wide. Returns the accepted side of each bracket.
inline Interval projection_interval(const KktSystem& sys, const EstimatedCoefficients& est,
                                    const ConfidenceSpec& spec, std::size_t j, const ConfidenceSet& scan) {
  const std::size_t k = sys.k;
  if (j >= k) throw DimensionMismatch("projection_interval: coordinate out of range");
  if (scan.accepted_count() == 0)
    throw EmptySet("confidence set is empty; minimum statistic " + std::to_string(scan.min_statistic()) +
                       " exceeds critical value " + std::to_string(scan.critical_value),
                   scan.min_statistic());
  const double cv = critical_value(sys, spec);
  const std::vector<Interval> env = envelope(scan.points, k);
  std::map<double, bool> cache;

  auto slice_accepts = [&](double t) {
    auto it = cache.find(t);
    if (it != cache.end()) return it->second;
    std::vector<DenseVector> cand = detail::slice_candidates(spec, scan, k, j, t);
    bool ok = false;
    std::vector<GridPoint> pts;
    pts.reserve(cand.size());
    for (auto& c : cand) pts.push_back({std::move(c), {}, 0.0, false});
    const std::size_t chunk = std::max<std::size_t>(1, resolve_threads(spec.threads) * 4);
    for (std::size_t start = 0; start < pts.size() && !ok; start += chunk) {
      const std::size_t stop = std::min(pts.size(), start + chunk);
      std::vector<GridPoint> part(pts.begin() + static_cast<std::ptrdiff_t>(start),
                                  pts.begin() + static_cast<std::ptrdiff_t>(stop));
      parallel_for(part.size(), spec.threads, [&](std::size_t i) {
        part[i].statistic = scan_statistic(sys, est, part[i].theta, spec.profile);
      });
      for (const auto& p : part)
        if (p.statistic <= cv) ok = true;
    }
    cache[t] = ok;
    return ok;
  };

  auto refine = [&](double inside, double bound, double dir) {
    // Walk outward one step at a time until the slice is rejected or the
    // box edge is reached; then bisect.
    double in = inside;
    double out = inside + dir * spec.grid_step;
    for (;;) {
      if (dir < 0 ? out <= bound : out >= bound) {
        if (slice_accepts(bound)) return bound;
        out = bound;
        break;
      }
      if (!slice_accepts(out)) break;
      in = out;
      out += dir * spec.grid_step;
    }
    while (std::abs(out - in) > spec.grid_step / 10.0) {
      const double mid = 0.5 * (in + out);
      if (slice_accepts(mid)) {
        in = mid;
      } else {
        out = mid;
      }
    }
    return in;
  };

  Interval iv;
  iv.lower = refine(env[j].lower, spec.lower[j], -1.0);
  iv.upper = refine(env[j].upper, spec.upper[j], +1.0);
  return iv;
}

inline Interval projection_interval(const KktSystem& sys, const EstimatedCoefficients& est,
                                    const ConfidenceSpec& spec, std::size_t j) {
  return projection_interval(sys, est, spec, j, grid_scan(sys, est, spec));
}

/// Default search box: the sample solution plus or minus ten standard
/// errors, taking the largest coefficient variance as the scale.
inline void default_theta_box(const EstimatedCoefficients& est, const DenseVector& theta_hat, ConfidenceSpec& spec) {
  double vmax = 0.0;
  for (std::size_t i = 0; i < est.dim(); ++i) vmax = std::max(vmax, est.V_hat(i, i));
  const double se = std::max(std::sqrt(vmax / est.n), 1e-6);
  const std::size_t k = theta_hat.size();
  spec.lower = DenseVector(k);
  spec.upper = DenseVector(k);
  for (std::size_t j = 0; j < k; ++j) {
    spec.lower[j] = theta_hat[j] - 10.0 * se;
    spec.upper[j] = theta_hat[j] + 10.0 * se;
    if (spec.constraints.nonneg || spec.constraints.simplex) spec.lower[j] = std::max(0.0, spec.lower[j]);
    if (spec.constraints.simplex) spec.upper[j] = std::min(1.0, spec.upper[j]);
  }
}

}  // namespace mpinfer
