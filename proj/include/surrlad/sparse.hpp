#pragma once

// Sparse corrected LAD: the l1-penalized Grassmann objective, its closed-form
// penalty gradient, the lambda grid with warm starts, and PIC-based selection.

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "surrlad/estimators.hpp"

namespace surrlad {

/// ||Psi Psi'||_1 and its Euclidean gradient with respect to Psi. The
/// gradient is the commutation-matrix expression
/// ivec{ vec(sgn(Psi Psi'))' (I + T_{p,p}) (Psi kron I_p) }, reduced to its
/// algebraically identical form (S + S') Psi with S = sgn(Psi Psi').
template <typename Scalar>
std::pair<Scalar, Mat<Scalar>> penalty_value_and_gradient(const GrassmannPoint<Scalar>& point,
                                                          Scalar zero_tol = Scalar(1e-12)) {
  const Mat<Scalar> proj = point.projection();
  const Scalar value = proj.cwiseAbs().sum();
  const Mat<Scalar> sgn = sign_matrix(proj, zero_tol);
  Mat<Scalar> grad = (sgn + sgn.transpose()) * point.basis;
  return {value, std::move(grad)};
}

/// Penalized cLAD objective: the sliced log-determinant likelihood minus
/// lambda * ||P_S||_1.
template <typename Scalar>
ObjectiveEvaluation<Scalar> penalized_objective(const GrassmannPoint<Scalar>& point,
                                                const SlicedMoments<Scalar>& moments,
                                                const Mat<Scalar>& l_hat, Scalar lambda,
                                                Scalar zero_tol = Scalar(1e-12)) {
  if (lambda < Scalar(0)) throw std::invalid_argument("penalized_objective: lambda must be >= 0");
  ObjectiveEvaluation<Scalar> ev = clad_objective(point, moments, l_hat);
  if (lambda == Scalar(0)) return ev;
  auto [pen, pen_grad] = penalty_value_and_gradient(point, zero_tol);
  ev.value -= lambda * pen;
  ev.euclidean_gradient -= lambda * pen_grad;
  return ev;
}

/// Tuning grid: 0 followed by G-1 logarithmically equally spaced values from
/// lambda_max * 1e-3 up to lambda_max.
template <typename Scalar = double>
Vec<Scalar> lambda_grid(Scalar lambda_max = Scalar(1), int grid_size = 40) {
  if (lambda_max <= Scalar(0)) throw std::invalid_argument("lambda_grid: lambda_max must be > 0");
  if (grid_size < 2) throw std::invalid_argument("lambda_grid: need at least 2 grid points");
  Vec<Scalar> grid(grid_size);
  grid[0] = Scalar(0);
  const Scalar lo = std::log10(lambda_max) - Scalar(3);
  const Scalar hi = std::log10(lambda_max);
  for (int k = 1; k < grid_size; ++k) {
    const Scalar t = (grid_size == 2) ? Scalar(1) : Scalar(k - 1) / Scalar(grid_size - 2);
    grid[k] = std::pow(Scalar(10), lo + t * (hi - lo));
  }
  return grid;
}

/// Projection information criterion:
///   ||P_lambda - P_0||_F^2 + p^{-1} log(p) * s(s - d),
/// where s counts diagonal entries of P_lambda above diag_tol and the
/// complexity term is floored at zero when s < d.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pic(const Eigen::MatrixBase<DerivedA>& p_lambda,
                              const Eigen::MatrixBase<DerivedB>& p_0, Index p, Index d,
                              typename DerivedA::Scalar diag_tol) {
  using Scalar = typename DerivedA::Scalar;
  if (p_lambda.rows() != p || p_lambda.cols() != p || p_0.rows() != p || p_0.cols() != p)
    throw std::invalid_argument("pic: projection dimensions do not match p");
  Index s = 0;
  for (Index j = 0; j < p; ++j)
    if (p_lambda(j, j) > diag_tol) ++s;
  const Scalar df = Scalar(std::max<Index>(s * (s - d), 0));
  const Scalar fit = (p_lambda - p_0).squaredNorm();
  return fit + std::log(Scalar(p)) / Scalar(p) * df;
}

template <typename Scalar>
struct SparseOptions {
  Scalar lambda_max = Scalar(1);
  int grid_size = 40;
  Scalar diag_tol = Scalar(1e-4);
  Scalar sign_zero_tol = Scalar(1e-12);
};

/// Per-lambda estimates, PIC values, the selected model, and its support.
template <typename Scalar>
struct SparsePath {
  Vec<Scalar> lambdas;
  std::vector<SubspaceEstimate<Scalar>> estimates;  // one per lambda
  Vec<Scalar> pic_values;                           // NaN where the fit failed
  int selected_index = -1;
  std::set<int> support;                            // nonzero diagonal of the selected projection

  const SubspaceEstimate<Scalar>& selected() const {
    return estimates[static_cast<size_t>(selected_index)];
  }
};

/// Sparse corrected LAD path given an existing cLAD pipeline fit: sweep the
/// lambda grid ascending with warm starts and select by PIC (ties to the
/// smallest lambda). Failed grid points are kept in the path, marked
/// non-converged, and excluded from selection.
template <typename Scalar>
SparsePath<Scalar> fit_sclad(const SurrogateProblem<Scalar>& problem, const CladFit<Scalar>& clad,
                             const SparseOptions<Scalar>& sparse_opts = {},
                             const TrustRegionOptions<Scalar>& tr_opts = {}) {
  const Mat<Scalar> p0 = clad.estimate.projection;
  const LikelihoodMatrices<Scalar>& lm = clad.matrices;

  SparsePath<Scalar> path;
  path.lambdas = lambda_grid(sparse_opts.lambda_max, sparse_opts.grid_size);
  const int grid_size = static_cast<int>(path.lambdas.size());
  path.pic_values = Vec<Scalar>::Constant(grid_size, std::numeric_limits<Scalar>::quiet_NaN());
  path.estimates.reserve(static_cast<size_t>(grid_size));

  GrassmannPoint<Scalar> warm = clad.estimate.basis;
  for (int k = 0; k < grid_size; ++k) {
    const Scalar lambda = path.lambdas[k];
    auto objective = [&lm, lambda, &sparse_opts](const Mat<Scalar>& psi) {
      ObjectiveEvaluation<Scalar> ev = sliced_logdet_objective(psi, lm);
      if (lambda > Scalar(0)) {
        GrassmannPoint<Scalar> pt{psi};
        auto [pen, pen_grad] = penalty_value_and_gradient(pt, sparse_opts.sign_zero_tol);
        ev.value -= lambda * pen;
        ev.euclidean_gradient -= lambda * pen_grad;
      }
      return ev;
    };
    SubspaceEstimate<Scalar> est;
    est.method = MethodTag::scLAD;
    try {
      est = detail::from_trust_region(trust_region_maximize(objective, warm, tr_opts),
                                      MethodTag::scLAD);
      warm = est.basis;
      path.pic_values[k] =
          pic(est.projection, p0, problem.p(), problem.d, sparse_opts.diag_tol);
    } catch (const DegeneracyError&) {
      est.basis = warm;
      est.projection = warm.projection();
      est.converged = false;
    }
    path.estimates.push_back(std::move(est));
  }

  for (int k = 0; k < grid_size; ++k) {
    if (!path.estimates[static_cast<size_t>(k)].converged) continue;
    if (!std::isfinite(path.pic_values[k])) continue;
    if (path.selected_index < 0 || path.pic_values[k] < path.pic_values[path.selected_index])
      path.selected_index = k;
  }
  if (path.selected_index < 0)
    throw DegeneracyError("fit_sclad: no grid point produced a converged fit");

  const Mat<Scalar>& psel = path.selected().projection;
  for (Index j = 0; j < problem.p(); ++j)
    if (psel(j, j) > sparse_opts.diag_tol) path.support.insert(static_cast<int>(j));
  return path;
}

/// Convenience form running the unregularized cLAD pipeline itself.
template <typename Scalar>
SparsePath<Scalar> fit_sclad(const SurrogateProblem<Scalar>& problem,
                             const SparseOptions<Scalar>& sparse_opts = {},
                             const TrustRegionOptions<Scalar>& tr_opts = {}) {
  return fit_sclad(problem, fit_clad_detailed(problem, tr_opts), sparse_opts, tr_opts);
}

}  // namespace surrlad
