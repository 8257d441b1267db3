/**
 * @file experiments.hpp
 * @brief Monte Carlo coverage studies.
 *
 * Simulation 1: intersection bounds theta = max(E X1, E X2), written as the
 * LP  max -theta  s.t.  -theta <= -E Xj. Only b is estimated.
 *
 * Simulation 2: the 2x2 LP  max c'theta  s.t.  A theta <= b, theta >= 0 with
 * every entry of (A, b, c) replaced by a sample mean of unit-variance draws.
 *
 * Replication r draws from Rng(master_seed + r), so results do not depend
 * on the number of worker threads.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"
#include "mpinfer/inference.hpp"
#include "mpinfer/kkt.hpp"
#include "mpinfer/lp.hpp"
#include "mpinfer/parallel.hpp"
#include "mpinfer/stats.hpp"

namespace mpinfer {

enum class SimDesignId { Sim1Design1, Sim1Design2, Sim1Design3, Sim2 };

inline std::string design_label(SimDesignId id) {
  switch (id) {
    case SimDesignId::Sim1Design1: return "1a";
    case SimDesignId::Sim1Design2: return "1b";
    case SimDesignId::Sim1Design3: return "1c";
    case SimDesignId::Sim2: return "2";
  }
  return "?";
}

inline SimDesignId parse_design_id(const std::string& s) {
  if (s == "1a") return SimDesignId::Sim1Design1;
  if (s == "1b") return SimDesignId::Sim1Design2;
  if (s == "1c") return SimDesignId::Sim1Design3;
  if (s == "2") return SimDesignId::Sim2;
  throw ConfigError("design", "unknown design '" + s + "' (expected 1a, 1b, 1c or 2)");
}

struct SimDesign {
  SimDesignId id = SimDesignId::Sim1Design1;
  DenseVector mu;     ///< Sim1: mean of (X1, X2)
  DenseMatrix sigma;  ///< Sim1: covariance of (X1, X2)
  LpProblem lp;       ///< Sim2: population program
  DenseVector theta0; ///< true parameter
  std::size_t n = 100;
  std::size_t reps = 1000;
  double alpha = 0.05;
  std::uint64_t master_seed = 42;
  /// Multiplies every sampling variance; 0 gives noiseless draws.
  double variance_scale = 1.0;
  std::size_t threads = 0;

  bool is_sim1() const { return id != SimDesignId::Sim2; }
};

inline SimDesign make_design(SimDesignId id, std::size_t n = 100, std::size_t reps = 1000, double alpha = 0.05,
                             std::uint64_t seed = 42) {
  SimDesign d;
  d.id = id;
  d.n = n;
  d.reps = reps;
  d.alpha = alpha;
  d.master_seed = seed;
  switch (id) {
    case SimDesignId::Sim1Design1:
      d.mu = {5.0, 3.0};
      d.sigma = DenseMatrix{{1.0, 0.0}, {0.0, 1.0}};
      break;
    case SimDesignId::Sim1Design2:
      d.mu = {5.0, 3.0};
      d.sigma = DenseMatrix{{3.0, 0.0}, {0.0, 1.0}};
      break;
    case SimDesignId::Sim1Design3:
      d.mu = {5.0, 3.0};
      d.sigma = DenseMatrix{{3.0, 1.5}, {1.5, 1.0}};
      break;
    case SimDesignId::Sim2:
      d.lp = LpProblem{DenseMatrix{{1.0, 2.0}, {1.0, -1.0}}, DenseVector{4.0, 1.0}, DenseVector{3.0, 2.0}, true};
      d.theta0 = {2.0, 1.0};
      return d;
  }
  d.theta0 = {std::max(d.mu[0], d.mu[1])};
  return d;
}

/// One Simulation 1 replication: the LP, its estimated coefficients and the truth.
struct Sim1Sample {
  LpProblem lp;
  EstimatedCoefficients est;
};

inline Sim1Sample sim1_instance(const DenseVector& xbar, const DenseMatrix& cov, double n) {
  Sim1Sample out;
  out.lp = LpProblem{DenseMatrix{{-1.0}, {-1.0}}, DenseVector{-xbar[0], -xbar[1]}, DenseVector{-1.0}, false};
  const DenseVector point = stack_coefficients(out.lp);
  DenseMatrix v(point.size(), point.size());
  std::vector<bool> mask(point.size(), false);
  // stacked layout (A11, A21, b1, b2, c): only b is estimated
  for (std::size_t i = 0; i < 2; ++i) {
    mask[2 + i] = true;
    for (std::size_t j = 0; j < 2; ++j) v(2 + i, 2 + j) = cov(i, j);
  }
  out.est = EstimatedCoefficients{point, v, n, mask};
  return out;
}

inline bool sim1_replication(const SimDesign& d, std::size_t rep) {
  Rng rng(d.master_seed + rep);
  DenseMatrix chol(2, 2);
  if (d.variance_scale > 0.0) chol = cholesky(d.variance_scale * d.sigma);
  const DenseMatrix draws = draw_gaussian_rows(rng, d.n, d.mu, chol);
  const MeanCov mc = sample_mean_cov(draws);
  const Sim1Sample s = sim1_instance(mc.mean, mc.cov, static_cast<double>(d.n));
  const KktSystem sys = build_lp_system(s.lp, s.est);
  ConfidenceSpec spec;
  spec.alpha = d.alpha;
  spec.lower = {d.theta0[0] - 1.0};
  spec.upper = {d.theta0[0] + 1.0};
  return member(sys, s.est, spec, d.theta0).accepted;
}

/// Simulation 2 replication data: sample means and entrywise variances.
struct Sim2Sample {
  LpProblem lp;
  EstimatedCoefficients est;
};

inline Sim2Sample sim2_instance(const SimDesign& d, std::size_t rep) {
  Rng rng(d.master_seed + rep);
  const DenseVector truth = stack_coefficients(d.lp);
  const std::size_t dim = truth.size();
  const double sd = std::sqrt(std::max(0.0, d.variance_scale));
  DenseVector mean(dim, 0.0);
  DenseMatrix v(dim, dim);
  DenseMatrix col(d.n, 1);
  for (std::size_t e = 0; e < dim; ++e) {
    for (std::size_t t = 0; t < d.n; ++t) col(t, 0) = truth[e] + sd * rng.normal();
    const MeanCov mc = sample_mean_cov(col);
    mean[e] = sd > 0.0 ? mc.mean[0] : truth[e];
    v(e, e) = sd > 0.0 ? mc.cov(0, 0) : 0.0;
  }
  Sim2Sample out;
  out.lp = unstack_lp(d.lp, mean);
  out.est = EstimatedCoefficients{mean, v, static_cast<double>(d.n), std::vector<bool>(dim, true)};
  return out;
}

inline bool sim2_replication(const SimDesign& d, std::size_t rep) {
  const Sim2Sample s = sim2_instance(d, rep);
  const KktSystem sys = build_lp_system(s.lp, s.est);
  ConfidenceSpec spec;
  spec.alpha = d.alpha;
  spec.constraints.nonneg = true;
  spec.lower = {0.0, 0.0};
  spec.upper = {d.theta0[0] + 5.0, d.theta0[1] + 5.0};
  return member(sys, s.est, spec, d.theta0).accepted;
}

namespace detail {

template <class Rep>
double coverage_of(const SimDesign& d, Rep&& replication) {
  if (d.reps == 0) throw PreconditionError("reps must be positive");
  std::vector<unsigned char> hit(d.reps, 0);
  parallel_for(d.reps, d.threads, [&](std::size_t r) { hit[r] = replication(d, r) ? 1 : 0; });
  std::size_t acc = 0;
  for (unsigned char h : hit) acc += h;
  return static_cast<double>(acc) / static_cast<double>(d.reps);
}

}  // namespace detail

inline double run_sim1(const SimDesign& d) {
  if (!d.is_sim1()) throw PreconditionError("run_sim1 needs a Simulation 1 design");
  return detail::coverage_of(d, sim1_replication);
}

inline double run_sim2(const SimDesign& d) {
  if (d.is_sim1()) throw PreconditionError("run_sim2 needs the Simulation 2 design");
  return detail::coverage_of(d, sim2_replication);
}

inline double run_design(const SimDesign& d) { return d.is_sim1() ? run_sim1(d) : run_sim2(d); }

/// Rows are designs (in order of first appearance), columns are sample sizes.
struct CoverageTable {
  std::vector<std::string> designs;
  std::vector<std::size_t> sizes;
  std::vector<std::vector<double>> cells;  ///< NaN where a (design, n) pair was not run

  bool empty() const { return designs.empty(); }

  std::string to_csv() const {
    std::ostringstream os;
    os << "design";
    for (std::size_t n : sizes) os << ",n=" << n;
    os << "\n";
    char buf[32];
    for (std::size_t r = 0; r < designs.size(); ++r) {
      os << designs[r];
      for (double v : cells[r]) {
        if (std::isnan(v)) {
          os << ",";
        } else {
          std::snprintf(buf, sizeof buf, ",%.3f", v);
          os << buf;
        }
      }
      os << "\n";
    }
    return os.str();
  }

  std::string to_text() const {
    std::vector<std::string> head{"design"};
    for (std::size_t n : sizes) head.push_back("n=" + std::to_string(n));
    std::vector<std::vector<std::string>> rows{head};
    char buf[32];
    for (std::size_t r = 0; r < designs.size(); ++r) {
      std::vector<std::string> row{designs[r]};
      for (double v : cells[r]) {
        if (std::isnan(v)) {
          row.emplace_back("-");
        } else {
          std::snprintf(buf, sizeof buf, "%.3f", v);
          row.emplace_back(buf);
        }
      }
      rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : rows)
      for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c > 0) os << "  ";
        const std::size_t pad = width[c] - row[c].size();
        if (c == 0) {
          os << row[c] << std::string(pad, ' ');
        } else {
          os << std::string(pad, ' ') << row[c];
        }
      }
      os << "\n";
    }
    return os.str();
  }
};

inline CoverageTable coverage_table(const std::vector<SimDesign>& designs) {
  CoverageTable t;
  for (const auto& d : designs) {
    const std::string label = design_label(d.id);
    if (std::find(t.designs.begin(), t.designs.end(), label) == t.designs.end()) t.designs.push_back(label);
    if (std::find(t.sizes.begin(), t.sizes.end(), d.n) == t.sizes.end()) t.sizes.push_back(d.n);
  }
  std::sort(t.sizes.begin(), t.sizes.end());
  t.cells.assign(t.designs.size(), std::vector<double>(t.sizes.size(), std::nan("")));
  for (const auto& d : designs) {
    const auto r = std::find(t.designs.begin(), t.designs.end(), design_label(d.id)) - t.designs.begin();
    const auto c = std::find(t.sizes.begin(), t.sizes.end(), d.n) - t.sizes.begin();
    t.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = run_design(d);
  }
  return t;
}

}  // namespace mpinfer
