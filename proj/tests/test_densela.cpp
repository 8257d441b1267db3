#include <gtest/gtest.h>

#include <random>

#include "mpinfer/densela.hpp"
#include "support/oracles.hpp"

using namespace mpinfer;

namespace {

DenseMatrix random_matrix(std::mt19937_64& gen, std::size_t r, std::size_t c) {
  std::normal_distribution<double> nd;
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = nd(gen);
  return m;
}

double max_diff(const DenseMatrix& a, const DenseMatrix& b) {
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.cols(), b.cols());
  double d = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d;
}

}  // namespace

TEST(Densela, ProductMatchesHandComputation) {
  const DenseMatrix a{{1, 2}, {3, 4}};
  const DenseMatrix b{{0, 1}, {1, 0}};
  EXPECT_EQ(a * b, (DenseMatrix{{2, 1}, {4, 3}}));
  EXPECT_EQ(a * (DenseVector{1, -1}), (DenseVector{-1, -1}));
  EXPECT_EQ(a.transpose(), (DenseMatrix{{1, 3}, {2, 4}}));
}

TEST(Densela, ShapeErrors) {
  const DenseMatrix a(2, 3);
  const DenseMatrix b(2, 3);
  EXPECT_THROW(a * b, DimensionMismatch);
  EXPECT_THROW(a * DenseVector(2), DimensionMismatch);
  EXPECT_THROW(DenseVector(2) + DenseVector(3), DimensionMismatch);
}

TEST(Densela, VecIsColumnMajor) {
  const DenseMatrix a{{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(vec(a), (DenseVector{1, 3, 5, 2, 4, 6}));
  EXPECT_EQ(unvec(vec(a), 3, 2), a);
}

TEST(Densela, KronSmallExample) {
  const DenseMatrix a{{1, 2}};
  const DenseMatrix b{{0, 1}, {1, 0}};
  EXPECT_EQ(kron(a, b), (DenseMatrix{{0, 1, 0, 2}, {1, 0, 2, 0}}));
}

TEST(Densela, KronVecIdentityOnRandomTriples) {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t p = dim(gen), q = dim(gen), r = dim(gen), s = dim(gen);
    const DenseMatrix a = random_matrix(gen, p, q);
    const DenseMatrix x = random_matrix(gen, q, r);
    const DenseMatrix b = random_matrix(gen, r, s);
    const DenseVector lhs = vec(a * x * b);
    const DenseVector rhs = kron(b.transpose(), a) * vec(x);
    ASSERT_EQ(lhs.size(), rhs.size());
    for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-10);
  }
}

TEST(Densela, SolveAgreesWithEigen) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 20; ++t) {
    const DenseMatrix m = random_matrix(gen, 5, 5) + 3.0 * DenseMatrix::identity(5);
    const DenseMatrix y = random_matrix(gen, 5, 1);
    const DenseVector x = solve(m, y.col_copy(0));
    const oracle::VectorXd ref = oracle::to_eigen(m).fullPivLu().solve(oracle::to_eigen(y.col_copy(0)));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x[i], ref(i), 1e-10);
  }
}

TEST(Densela, SingularSolveThrows) {
  EXPECT_THROW(solve(DenseMatrix{{1, 2}, {2, 4}}, DenseVector{1, 2}), SingularMatrix);
}

TEST(Densela, CholeskyReconstructs) {
  std::mt19937_64 gen(3);
  const DenseMatrix g = random_matrix(gen, 4, 4);
  const DenseMatrix m = g * g.transpose() + DenseMatrix::identity(4);
  const DenseMatrix l = cholesky(m);
  EXPECT_LT(max_diff(l * l.transpose(), m), 1e-12);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) EXPECT_EQ(l(i, j), 0.0);
  EXPECT_THROW(cholesky(DenseMatrix{{1, 2}, {2, 1}}), NotPositiveDefinite);
}

TEST(Densela, SymPinvInvertsAndFallsBack) {
  const DenseMatrix m{{2, 1}, {1, 2}};
  EXPECT_LT(max_diff(sym_pinv(m, 0.0) * m, DenseMatrix::identity(2)), 1e-12);
  // Singular PSD: the ridge retry succeeds and gives a large but finite inverse.
  const DenseMatrix s{{1, 1}, {1, 1}};
  const DenseMatrix w = sym_pinv_with_fallback(s);
  EXPECT_TRUE(std::isfinite(w(0, 0)));
  EXPECT_THROW(sym_pinv_with_fallback(DenseMatrix(2, 2)), NotPositiveDefinite);
  EXPECT_THROW(sym_pinv(DenseMatrix{{1, 0.5}, {0.0, 1}}, 0.0), PreconditionError);
}

TEST(Densela, SymEigenMatchesEigen) {
  std::mt19937_64 gen(5);
  const DenseMatrix g = random_matrix(gen, 5, 5);
  const DenseMatrix m = symmetrize(g + g.transpose());
  const SymmetricEigen e = sym_eigen(m);
  Eigen::SelfAdjointEigenSolver<oracle::MatrixXd> ref(oracle::to_eigen(m));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(e.values[i], ref.eigenvalues()(static_cast<Eigen::Index>(i)), 1e-10);
  const DenseMatrix recon = e.vectors * DenseMatrix::diagonal(e.values) * e.vectors.transpose();
  EXPECT_LT(max_diff(recon, m), 1e-10);
}

TEST(Densela, NullSpaceIsOrthogonalComplement) {
  const DenseMatrix a{{1, 1, 0}, {0, 1, 1}};
  const DenseMatrix z = null_space(a, 3);
  ASSERT_EQ(z.cols(), 1u);
  const DenseMatrix az = a * z;
  EXPECT_LT(max_abs(az), 1e-12);
  EXPECT_NEAR(norm2(z.col_copy(0)), 1.0, 1e-12);
  EXPECT_EQ(null_space(DenseMatrix(0, 2), 2), DenseMatrix::identity(2));
}

TEST(Densela, EmptyBlocksStack) {
  const DenseMatrix e(0, 3);
  const DenseMatrix r{{1, 2, 3}};
  EXPECT_EQ(vstack(e, r), r);
  EXPECT_EQ(vstack(r, e), r);
  EXPECT_EQ((e * DenseVector(3)).size(), 0u);
}
