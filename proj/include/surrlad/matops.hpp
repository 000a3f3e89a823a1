#pragma once

// Matrix primitives shared by the likelihood objectives and penalty calculus:
// column-stacking vectorization, commutation matrix, Kronecker product,
// entrywise sign, pseudo-determinant, and positive-definite repair.

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <sstream>

#include "surrlad/common.hpp"

namespace surrlad {

/// Stacks the columns of A into a single vector, column-major by definition
/// regardless of the expression's storage order.
template <typename Derived>
Vec<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Index m = a.rows(), n = a.cols();
  Vec<Scalar> v(m * n);
  for (Index j = 0; j < n; ++j) v.segment(j * m, m) = a.col(j);
  return v;
}

/// Inverse of vec: reshapes a length-(m*n) vector into an m-by-n matrix.
template <typename Derived>
Mat<typename Derived::Scalar> ivec(const Eigen::MatrixBase<Derived>& v, Index m, Index n) {
  using Scalar = typename Derived::Scalar;
  if (v.cols() != 1 || v.rows() != m * n) {
    std::ostringstream os;
    os << "ivec: vector of length " << v.size() << " does not reshape to " << m << "x" << n;
    throw std::invalid_argument(os.str());
  }
  Mat<Scalar> a(m, n);
  for (Index j = 0; j < n; ++j) a.col(j) = v.segment(j * m, m);
  return a;
}

/// The mn-by-mn permutation matrix T with vec(A) == T * vec(A^T) for every
/// m-by-n matrix A.
template <typename Scalar = double>
Mat<Scalar> commutation_matrix(Index m, Index n) {
  if (m < 1 || n < 1) throw std::invalid_argument("commutation_matrix: m, n must be >= 1");
  Mat<Scalar> t = Mat<Scalar>::Zero(m * n, m * n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) t(i + j * m, j + i * n) = Scalar(1);
  return t;
}

/// Kronecker product A (x) B.
template <typename DerivedA, typename DerivedB>
Mat<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& a,
                                    const Eigen::MatrixBase<DerivedB>& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

/// Entrywise -1/0/+1 with |a_ij| <= zero_tol mapped to 0.
template <typename Derived>
Mat<typename Derived::Scalar> sign_matrix(const Eigen::MatrixBase<Derived>& a,
                                          typename Derived::Scalar zero_tol) {
  using Scalar = typename Derived::Scalar;
  if (zero_tol < Scalar(0)) throw std::invalid_argument("sign_matrix: zero_tol must be >= 0");
  return a.unaryExpr([zero_tol](Scalar x) {
    if (std::abs(x) <= zero_tol) return Scalar(0);
    return x > Scalar(0) ? Scalar(1) : Scalar(-1);
  });
}

/// A dense symmetric matrix. The constructor validates symmetry and then
/// symmetrizes as (A + A^T)/2 to absorb round-off before spectral work.
template <typename Scalar>
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Mat<Scalar> a, Scalar sym_tol = Scalar(1e-12)) {
    if (a.rows() != a.cols()) throw std::invalid_argument("SymmetricMatrix: matrix must be square");
    if (a.size() > 0 && (a - a.transpose()).cwiseAbs().maxCoeff() > sym_tol)
      throw std::invalid_argument("SymmetricMatrix: input is not symmetric within tolerance");
    m_ = ((a + a.transpose()) / Scalar(2)).eval();
  }

  Index dim() const { return m_.rows(); }
  const Mat<Scalar>& m() const { return m_; }

 private:
  Mat<Scalar> m_;
};

/// Product of the eigenvalues of a symmetric matrix whose magnitude exceeds
/// rank_tol * max(max|lambda|, 1). Empty product gives 1.
template <typename Scalar>
Scalar pseudo_det(const SymmetricMatrix<Scalar>& a, Scalar rank_tol = Scalar(1e-9)) {
  if (rank_tol <= Scalar(0)) throw std::invalid_argument("pseudo_det: rank_tol must be > 0");
  if (a.dim() == 0) return Scalar(1);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(a.m(), Eigen::EigenvaluesOnly);
  const Vec<Scalar>& ev = es.eigenvalues();
  const Scalar cutoff = rank_tol * std::max(ev.cwiseAbs().maxCoeff(), Scalar(1));
  Scalar prod = Scalar(1);
  for (Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) > cutoff) prod *= ev[i];
  return prod;
}

/// Convenience overload validating symmetry of a raw matrix first.
template <typename Scalar>
Scalar pseudo_det(const Mat<Scalar>& a, Scalar rank_tol = Scalar(1e-9)) {
  return pseudo_det(SymmetricMatrix<Scalar>(a), rank_tol);
}

/// Floors the eigenvalues of a symmetric matrix at floor_scale * max(lambda_max, 1)
/// and reconstructs. Used where moment differences (e.g. Sigma_w - Sigma_u)
/// can come out indefinite in finite samples.
template <typename Scalar>
Mat<Scalar> pd_repair(const Mat<Scalar>& a, Scalar floor_scale = Scalar(1e-6)) {
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(((a + a.transpose()) / Scalar(2)).eval());
  Vec<Scalar> ev = es.eigenvalues();
  const Scalar floor = floor_scale * std::max(ev.maxCoeff(), Scalar(1));
  for (Index i = 0; i < ev.size(); ++i) ev[i] = std::max(ev[i], floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace surrlad
