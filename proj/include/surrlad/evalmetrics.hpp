#pragma once

// Evaluation metrics: projection-distance estimation error and variable
// selection counts read off projection diagonals.

#include <set>

#include "surrlad/common.hpp"

namespace surrlad {

/// Frobenius norm of the difference of two projection matrices.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar projection_error(const Eigen::MatrixBase<DerivedA>& p_hat,
                                           const Eigen::MatrixBase<DerivedB>& p_true) {
  if (p_hat.rows() != p_true.rows() || p_hat.cols() != p_true.cols())
    throw std::invalid_argument("projection_error: dimension mismatch");
  return (p_hat - p_true).norm();
}

/// Orthogonal projection onto the column space of a full-column-rank B:
/// B (B'B)^{-1} B'.
template <typename Derived>
Mat<typename Derived::Scalar> true_projection(const Eigen::MatrixBase<Derived>& b) {
  using Scalar = typename Derived::Scalar;
  const Mat<Scalar> gram = b.transpose() * b;
  Eigen::LLT<Mat<Scalar>> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("true_projection: B is rank-deficient");
  // Guard against near-rank-deficiency that LLT tolerates.
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(gram, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <=
      Scalar(1e-12) * std::max(es.eigenvalues().maxCoeff(), Scalar(1)))
    throw std::invalid_argument("true_projection: B is rank-deficient");
  return b * llt.solve(b.transpose());
}

struct SelectionCounts {
  int tp = 0;
  int fp = 0;
  int fn_ = 0;
  double f1 = 0.0;
};

/// Support recovery counts: the estimated support is the set of diagonal
/// entries of P-hat exceeding diag_tol.
template <typename Derived>
SelectionCounts selection_counts(const Eigen::MatrixBase<Derived>& p_hat,
                                 const std::set<int>& true_support,
                                 typename Derived::Scalar diag_tol) {
  const Index p = p_hat.rows();
  for (int j : true_support)
    if (j < 0 || j >= p) throw std::invalid_argument("selection_counts: support index out of range");
  SelectionCounts c;
  for (Index j = 0; j < p; ++j) {
    const bool estimated = p_hat(j, j) > diag_tol;
    const bool truth = true_support.count(static_cast<int>(j)) > 0;
    if (estimated && truth) ++c.tp;
    else if (estimated && !truth) ++c.fp;
    else if (!estimated && truth) ++c.fn_;
  }
  const int denom = 2 * c.tp + c.fp + c.fn_;
  c.f1 = denom > 0 ? 2.0 * c.tp / denom : 0.0;
  return c;
}

}  // namespace surrlad
