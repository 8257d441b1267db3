/**
 * @file densela.hpp
 * @brief Small dense linear algebra kernel.
 *
 * Row-major double-precision matrices and vectors, the vec/Kronecker
 * operators used to write bilinear moment functions as linear maps of the
 * stacked coefficients, a partial-pivot LU solve, Cholesky, a ridged
 * symmetric inverse and a Jacobi eigensolver. Everything here targets
 * problems with at most a few dozen rows.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mpinfer/errors.hpp"

namespace mpinfer {

class DenseVector {
 public:
  DenseVector() = default;
  explicit DenseVector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  DenseVector(std::initializer_list<double> values) : data_(values) {}
  explicit DenseVector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool operator==(const DenseVector&) const = default;

 private:
  std::vector<double> data_;
};

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
      : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionMismatch("DenseMatrix: data length " + std::to_string(data_.size()) +
                              " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DimensionMismatch("DenseMatrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(const DenseVector& d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  /// Single-row matrix holding `v` as its only row.
  static DenseMatrix row_vector(const DenseVector& v) {
    return DenseMatrix(1, v.size(), v.values());
  }

  /// Single-column matrix holding `v`.
  static DenseMatrix column_vector(const DenseVector& v) {
    return DenseMatrix(v.size(), 1, v.values());
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  DenseVector row_copy(std::size_t i) const {
    return DenseVector(std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                                           data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_)));
  }
  DenseVector col_copy(std::size_t j) const {
    DenseVector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  const std::vector<double>& values() const noexcept { return data_; }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Elementwise and product operators

inline DenseVector operator+(const DenseVector& a, const DenseVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector +: length mismatch");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline DenseVector operator-(const DenseVector& a, const DenseVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("vector -: length mismatch");
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline DenseVector operator*(double s, const DenseVector& a) {
  DenseVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

inline DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("matrix +: shape mismatch");
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) + b(i, j);
  return out;
}

inline DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("matrix -: shape mismatch");
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, j);
  return out;
}

inline DenseMatrix operator*(double s, const DenseMatrix& a) {
  DenseMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = s * a(i, j);
  return out;
}

inline DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matrix *: inner dimension mismatch");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t l = 0; l < a.cols(); ++l) {
      const double ail = a(i, l);
      if (ail == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += ail * b(l, j);
    }
  return out;
}

inline DenseVector operator*(const DenseMatrix& a, const DenseVector& x) {
  if (a.cols() != x.size()) throw DimensionMismatch("matrix*vector: dimension mismatch");
  DenseVector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

inline double dot(const DenseVector& a, const DenseVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm_inf(const DenseVector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double norm2(const DenseVector& v) { return std::sqrt(dot(v, v)); }

/// Maximum absolute row sum.
inline double norm_inf(const DenseMatrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (double x : m.row(i)) s += std::abs(x);
    best = std::max(best, s);
  }
  return best;
}

inline double max_abs(const DenseMatrix& m) {
  double best = 0.0;
  for (double x : m.values()) best = std::max(best, std::abs(x));
  return best;
}

inline double trace(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw DimensionMismatch("trace: matrix not square");
  double t = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) t += m(i, i);
  return t;
}

inline bool is_symmetric(const DenseMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
  return true;
}

/// Symmetric part (M + M')/2.
inline DenseMatrix symmetrize(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      out(i, j) = avg;
      out(j, i) = avg;
    }
  return out;
}

inline DenseMatrix select_rows(const DenseMatrix& m, std::span<const std::size_t> idx) {
  DenseMatrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) = m(idx[r], j);
  return out;
}

inline DenseMatrix select_cols(const DenseMatrix& m, std::span<const std::size_t> idx) {
  DenseMatrix out(m.rows(), idx.size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t c = 0; c < idx.size(); ++c) out(i, c) = m(i, idx[c]);
  return out;
}

inline DenseMatrix select(const DenseMatrix& m, std::span<const std::size_t> rows,
                          std::span<const std::size_t> cols) {
  DenseMatrix out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = m(rows[r], cols[c]);
  return out;
}

inline DenseVector select(const DenseVector& v, std::span<const std::size_t> idx) {
  DenseVector out(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) out[r] = v[idx[r]];
  return out;
}

/// Stacks `top` over `bottom`; either may have zero rows.
inline DenseMatrix vstack(const DenseMatrix& top, const DenseMatrix& bottom) {
  if (top.rows() == 0) return bottom;
  if (bottom.rows() == 0) return top;
  if (top.cols() != bottom.cols()) throw DimensionMismatch("vstack: column mismatch");
  std::vector<double> d = top.values();
  d.insert(d.end(), bottom.values().begin(), bottom.values().end());
  return DenseMatrix(top.rows() + bottom.rows(), top.cols(), std::move(d));
}

inline DenseVector concat(const DenseVector& a, const DenseVector& b) {
  std::vector<double> d = a.values();
  d.insert(d.end(), b.begin(), b.end());
  return DenseVector(std::move(d));
}

// ---------------------------------------------------------------------------
// vec / Kronecker

/// Column-stacking: element (i,j) lands at position j*rows + i.
inline DenseVector vec(const DenseMatrix& m) {
  DenseVector out(m.rows() * m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) out[j * m.rows() + i] = m(i, j);
  return out;
}

/// Inverse of vec for a rows x cols target.
inline DenseMatrix unvec(const DenseVector& v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) throw DimensionMismatch("unvec: length does not match shape");
  DenseMatrix m(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = v[j * rows + i];
  return m;
}

/// Block (i,j) of the result is w(i,j) * x.
inline DenseMatrix kron(const DenseMatrix& w, const DenseMatrix& x) {
  DenseMatrix out(w.rows() * x.rows(), w.cols() * x.cols());
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      const double wij = w(i, j);
      for (std::size_t p = 0; p < x.rows(); ++p)
        for (std::size_t q = 0; q < x.cols(); ++q)
          out(i * x.rows() + p, j * x.cols() + q) = wij * x(p, q);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Factorizations

/// Solves M x = y by LU with partial pivoting.
inline DenseVector solve(const DenseMatrix& m, const DenseVector& y) {
  const std::size_t n = m.rows();
  if (m.cols() != n) throw DimensionMismatch("solve: matrix not square");
  if (y.size() != n) throw DimensionMismatch("solve: rhs length mismatch");
  const double scale = norm_inf(m);
  const double pivot_floor = 1e-12 * scale;
  DenseMatrix a = m;
  DenseVector b = y;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(a(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > best) {
        best = std::abs(a(r, col));
        piv = r;
      }
    }
    if (!(best >= pivot_floor) || best == 0.0) {
      throw SingularMatrix("solve: pivot " + std::to_string(best) + " below threshold");
    }
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      b[r] -= f * b[col];
    }
  }
  DenseVector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= a(i, j) * x[j];
    x[i] = acc / a(i, i);
  }
  return x;
}

/// Lower-triangular L with M = L L'.
inline DenseMatrix cholesky(const DenseMatrix& m) {
  const std::size_t n = m.rows();
  if (m.cols() != n) throw DimensionMismatch("cholesky: matrix not square");
  double diag_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_scale = std::max(diag_scale, std::abs(m(i, i)));
  const double floor = 1e-14 * diag_scale;
  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = m(j, j);
    for (std::size_t p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    if (!(d > floor)) throw NotPositiveDefinite("cholesky: non-positive pivot at " + std::to_string(j));
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

/// Solves L L' x = y given the Cholesky factor.
inline DenseVector cholesky_solve(const DenseMatrix& l, const DenseVector& y) {
  const std::size_t n = l.rows();
  DenseVector z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t p = 0; p < i; ++p) s -= l(i, p) * z[p];
    z[i] = s / l(i, i);
  }
  DenseVector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = z[i];
    for (std::size_t p = i + 1; p < n; ++p) s -= l(p, i) * x[p];
    x[i] = s / l(i, i);
  }
  return x;
}

/// Inverse of (M + ridge*I) via Cholesky. M must be symmetric to 1e-8.
inline DenseMatrix sym_pinv(const DenseMatrix& m, double ridge) {
  if (!is_symmetric(m, 1e-8)) throw PreconditionError("sym_pinv: matrix not symmetric");
  const std::size_t n = m.rows();
  DenseMatrix shifted = symmetrize(m);
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) += ridge;
  const DenseMatrix l = cholesky(shifted);
  DenseMatrix inv(n, n);
  DenseVector e(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    const DenseVector col = cholesky_solve(l, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return symmetrize(inv);
}

/// sym_pinv with the standard retry: ridge 0, then 1e-10 * trace / dim.
inline DenseMatrix sym_pinv_with_fallback(const DenseMatrix& m) {
  try {
    return sym_pinv(m, 0.0);
  } catch (const NotPositiveDefinite&) {
    const double ridge = m.rows() == 0 ? 0.0 : 1e-10 * trace(m) / static_cast<double>(m.rows());
    if (!(ridge > 0.0)) throw NotPositiveDefinite("sym_pinv: zero trace, ridge fallback impossible");
    return sym_pinv(m, ridge);
  }
}

struct SymmetricEigen {
  DenseVector values;   ///< ascending
  DenseMatrix vectors;  ///< column j pairs with values[j]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
inline SymmetricEigen sym_eigen(const DenseMatrix& m) {
  const std::size_t n = m.rows();
  if (m.cols() != n) throw DimensionMismatch("sym_eigen: matrix not square");
  DenseMatrix a = symmetrize(m);
  DenseMatrix v = DenseMatrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    double total = off;
    for (std::size_t i = 0; i < n; ++i) total += 0.5 * a(i, i) * a(i, i);
    if (off <= 1e-30 * std::max(total, 1e-300)) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{DenseVector(n), DenseMatrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

/// Orthonormal basis (as columns) for the null space of a full-row-rank `a`.
/// Returns cols() - rows() columns; an empty `a` yields the identity.
inline DenseMatrix null_space(const DenseMatrix& a, std::size_t cols) {
  if (a.rows() == 0) return DenseMatrix::identity(cols);
  if (a.rows() >= cols) return DenseMatrix(cols, 0);
  const SymmetricEigen eig = sym_eigen(a.transpose() * a);
  const std::size_t dim = cols - a.rows();
  DenseMatrix z(cols, dim);
  for (std::size_t c = 0; c < dim; ++c)
    for (std::size_t r = 0; r < cols; ++r) z(r, c) = eig.vectors(r, c);
  return z;
}

}  // namespace mpinfer
