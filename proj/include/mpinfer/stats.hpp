/**
 * @file stats.hpp
 * @brief Chi-square quantiles, a reproducible Gaussian sampler and
 *        covariance estimators for estimated program coefficients.
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>

#include "mpinfer/densela.hpp"
#include "mpinfer/errors.hpp"

namespace mpinfer {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: draw i is a pure function of (seed, i), so
/// streams are reproducible bit-for-bit and cheap to fork per replication.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), key_(detail::mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + detail::kGolden * counter_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Draws `n` rows from N(mean, L L') given the lower Cholesky factor `chol`.
inline DenseMatrix draw_gaussian_rows(Rng& rng, std::size_t n, const DenseVector& mean, const DenseMatrix& chol) {
  const std::size_t d = mean.size();
  DenseMatrix out(n, d);
  DenseVector z(d);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < d; ++j) z[j] = rng.normal();
    for (std::size_t i = 0; i < d; ++i) {
      double acc = mean[i];
      for (std::size_t j = 0; j <= i; ++j) acc += chol(i, j) * z[j];
      out(t, i) = acc;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma and chi-square quantile

/// P(a, x) = gamma(a, x) / Gamma(a).
inline double regularized_lower_gamma(double a, double x) {
  if (!(a > 0.0)) throw DomainError("regularized_lower_gamma: a must be positive");
  if (x <= 0.0) return 0.0;
  const double log_prefix = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return std::min(1.0, sum * std::exp(log_prefix));
  }
  // Lentz continued fraction for Q(a, x).
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-17) break;
  }
  return std::max(0.0, 1.0 - std::exp(log_prefix) * h);
}

inline double chi2_cdf(std::size_t df, double x) {
  if (df < 1) throw DomainError("chi2_cdf: df must be >= 1");
  return regularized_lower_gamma(0.5 * static_cast<double>(df), 0.5 * x);
}

/// Quantile by bisection on [0, df + 40 sqrt(2 df)].
inline double chi2_quantile(std::size_t df, double p) {
  if (df < 1) throw DomainError("chi2_quantile: df must be >= 1");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("chi2_quantile: p must lie in (0, 1)");
  const double dfd = static_cast<double>(df);
  double lo = 0.0;
  double hi = dfd + 40.0 * std::sqrt(2.0 * dfd);
  while (chi2_cdf(df, hi) < p) hi *= 2.0;
  for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(df, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Covariance estimators

struct MeanCov {
  DenseVector mean;
  DenseMatrix cov;  ///< (n-1) denominator
};

inline MeanCov sample_mean_cov(const DenseMatrix& data) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (n < 2) throw TooFewRows("sample_mean_cov: need at least 2 rows");
  MeanCov out{DenseVector(d, 0.0), DenseMatrix(d, d, 0.0)};
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += data(t, j);
  for (std::size_t j = 0; j < d; ++j) out.mean[j] /= static_cast<double>(n);
  DenseVector dev(d);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < d; ++j) dev[j] = data(t, j) - out.mean[j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) out.cov(i, j) += dev[i] * dev[j];
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      out.cov(i, j) /= denom;
      out.cov(j, i) = out.cov(i, j);
    }
  return out;
}

/// Plug-in covariance of per-observation influence terms
///   h_t = (vec(F (x_t - xbar)(x_t - xbar)'), x_t),
/// i.e. the asymptotic covariance of sqrt(T) (vec(Qhat), Rhat) with the
/// covariance block first. `scale` is the annualization factor F applied
/// to Qhat.
inline DenseMatrix moments_influence_cov(const DenseMatrix& returns, double scale = 1.0) {
  const std::size_t t_obs = returns.rows();
  const std::size_t k = returns.cols();
  if (t_obs < 2) throw TooFewRows("moments_influence_cov: need at least 2 rows");
  const MeanCov mc = sample_mean_cov(returns);
  const std::size_t dim = k * k + k;
  DenseMatrix h(t_obs, dim);
  for (std::size_t t = 0; t < t_obs; ++t) {
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < k; ++i)
        h(t, j * k + i) = scale * (returns(t, i) - mc.mean[i]) * (returns(t, j) - mc.mean[j]);
    for (std::size_t i = 0; i < k; ++i) h(t, k * k + i) = returns(t, i);
  }
  return sample_mean_cov(h).cov;
}

}  // namespace mpinfer
