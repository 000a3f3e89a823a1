#pragma once

// Likelihood-based central-subspace estimators for surrogate data
// W = X + U with known measurement-error covariance: the naive LAD fit,
// the corrected cLAD with its method-of-moments Delta-hat, the
// invariance-law LAD, and the IL-SIR / IL-SAVE spectral baselines.

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "surrlad/manifold.hpp"
#include "surrlad/matops.hpp"
#include "surrlad/slices.hpp"

namespace surrlad {

enum class MethodTag { LAD, cLAD, IL_LAD, IL_SIR, IL_SAVE, scLAD };

inline std::string to_string(MethodTag tag) {
  switch (tag) {
    case MethodTag::LAD: return "lad";
    case MethodTag::cLAD: return "clad";
    case MethodTag::IL_LAD: return "il-lad";
    case MethodTag::IL_SIR: return "il-sir";
    case MethodTag::IL_SAVE: return "il-save";
    case MethodTag::scLAD: return "sclad";
  }
  return "?";
}

inline MethodTag method_from_string(const std::string& s) {
  if (s == "lad") return MethodTag::LAD;
  if (s == "clad") return MethodTag::cLAD;
  if (s == "il-lad") return MethodTag::IL_LAD;
  if (s == "il-sir") return MethodTag::IL_SIR;
  if (s == "il-save") return MethodTag::IL_SAVE;
  if (s == "sclad") return MethodTag::scLAD;
  throw std::invalid_argument("unknown method '" + s + "'");
}

/// Observed data plus the known measurement-error covariance and the target
/// subspace dimension and slice count.
template <typename Scalar>
struct SurrogateProblem {
  Mat<Scalar> W;                   // n-by-p surrogates
  Vec<Scalar> y;                   // response
  SymmetricMatrix<Scalar> sigma_u; // p-by-p measurement-error covariance
  Index d = 1;
  int num_slices = 10;
  bool y_is_categorical = false;

  Index n() const { return W.rows(); }
  Index p() const { return W.cols(); }

  void validate() const {
    if (y.size() != W.rows()) throw std::invalid_argument("SurrogateProblem: y length != rows of W");
    if (sigma_u.dim() != W.cols())
      throw std::invalid_argument("SurrogateProblem: sigma_u dimension != columns of W");
    if (d < 1 || d >= W.cols()) throw std::invalid_argument("SurrogateProblem: need 1 <= d < p");
    if (W.rows() <= W.cols()) throw std::invalid_argument("SurrogateProblem: need n > p");
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sigma_u.m(), Eigen::EigenvaluesOnly);
    const Scalar lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < Scalar(-1e-10) * std::max(Scalar(1), lmax))
      throw std::invalid_argument("SurrogateProblem: sigma_u is not positive semi-definite");
  }
};

/// A fitted subspace with its projection matrix and solver diagnostics.
template <typename Scalar>
struct SubspaceEstimate {
  GrassmannPoint<Scalar> basis;
  Mat<Scalar> projection;
  Scalar objective_value = Scalar(0);
  bool converged = false;
  int iterations = 0;
  MethodTag method = MethodTag::LAD;
  Scalar grad_norm = Scalar(0);
};

/// Method-of-moments estimate of E{Var(W|y)} and the derived adjustment.
template <typename Scalar>
struct DeltaEstimate {
  SymmetricMatrix<Scalar> delta_n;  // estimate of E{Var(W|y)} = Delta + Sigma_u
  SymmetricMatrix<Scalar> delta;    // Delta-hat, positive-definite repaired
  Mat<Scalar> L_hat;                // Delta (Delta + Sigma_u)^{-1}
};

/// The symmetric p-by-p matrices entering a sliced log-determinant objective:
/// a marginal matrix and one matrix per slice with weights summing to one.
template <typename Scalar>
struct LikelihoodMatrices {
  Mat<Scalar> marginal;
  std::vector<Mat<Scalar>> slices;
  std::vector<Scalar> weights;
};

namespace detail {

template <typename Scalar>
struct LogDetTerm {
  Scalar logdet;
  Mat<Scalar> grad_part;  // A Psi (Psi' A Psi)^{-1}
};

template <typename Scalar>
LogDetTerm<Scalar> logdet_term(const Mat<Scalar>& a, const Mat<Scalar>& psi,
                               const char* what, int slice_index) {
  const Mat<Scalar> b = a * psi;                       // p-by-d
  const Mat<Scalar> inner = psi.transpose() * b;       // d-by-d
  Eigen::LLT<Mat<Scalar>> llt(inner);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << what;
    if (slice_index >= 0) os << " (slice " << slice_index << ")";
    os << ": inner d-by-d matrix is not positive definite";
    throw DegeneracyError(os.str());
  }
  Scalar logdet = Scalar(0);
  for (Index i = 0; i < inner.rows(); ++i) logdet += Scalar(2) * std::log(llt.matrixL()(i, i));
  return {logdet, llt.solve(b.transpose()).transpose()};
}

}  // namespace detail

/// Value and Euclidean gradient of
///   log|Psi' A Psi| - sum_m w_m log|Psi' A_m Psi|,
/// the rotation-invariant form shared by the LAD-type objectives.
template <typename Scalar>
ObjectiveEvaluation<Scalar> sliced_logdet_objective(const Mat<Scalar>& psi,
                                                    const LikelihoodMatrices<Scalar>& lm) {
  auto marg = detail::logdet_term(lm.marginal, psi, "sliced_logdet_objective", -1);
  Scalar value = marg.logdet;
  Mat<Scalar> grad = marg.grad_part;
  for (size_t m = 0; m < lm.slices.size(); ++m) {
    auto term = detail::logdet_term(lm.slices[m], psi, "sliced_logdet_objective",
                                    static_cast<int>(m));
    value -= lm.weights[m] * term.logdet;
    grad -= lm.weights[m] * term.grad_part;
  }
  return {value, Scalar(2) * grad};
}

template <typename Scalar>
LikelihoodMatrices<Scalar> lad_matrices(const SlicedMoments<Scalar>& moments) {
  LikelihoodMatrices<Scalar> lm;
  lm.marginal = moments.marginal_cov;
  lm.slices = moments.slice_covs;
  lm.weights = moments.proportions;
  return lm;
}

/// Conjugates every moment matrix by L: L M L'.
template <typename Scalar>
LikelihoodMatrices<Scalar> clad_matrices(const SlicedMoments<Scalar>& moments,
                                         const Mat<Scalar>& l_hat) {
  LikelihoodMatrices<Scalar> lm;
  lm.marginal = l_hat * moments.marginal_cov * l_hat.transpose();
  lm.slices.reserve(moments.slice_covs.size());
  for (const auto& c : moments.slice_covs) lm.slices.push_back(l_hat * c * l_hat.transpose());
  lm.weights = moments.proportions;
  return lm;
}

/// Naive LAD objective on the raw surrogate moments.
template <typename Scalar>
ObjectiveEvaluation<Scalar> lad_objective(const GrassmannPoint<Scalar>& point,
                                          const SlicedMoments<Scalar>& moments) {
  return sliced_logdet_objective(point.basis, lad_matrices(moments));
}

/// Corrected LAD objective: the LAD form on moments conjugated by L-hat.
template <typename Scalar>
ObjectiveEvaluation<Scalar> clad_objective(const GrassmannPoint<Scalar>& point,
                                           const SlicedMoments<Scalar>& moments,
                                           const Mat<Scalar>& l_hat) {
  return sliced_logdet_objective(point.basis, clad_matrices(moments, l_hat));
}

namespace detail {

template <typename Scalar>
Mat<Scalar> inverse_sqrt_spd(const Mat<Scalar>& a, const char* what) {
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(a);
  const Vec<Scalar>& ev = es.eigenvalues();
  const Scalar lmax = ev.cwiseAbs().maxCoeff();
  if (ev.minCoeff() <= Scalar(1e-12) * std::max(lmax, Scalar(1)))
    throw DegeneracyError(std::string(what) + ": covariance is numerically singular");
  Vec<Scalar> inv_sqrt = ev.cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
}

template <typename Scalar>
struct SpectralSubspace {
  GrassmannPoint<Scalar> basis;
  Vec<Scalar> top_eigenvalues;  // leading first
  bool informative = true;
};

/// Top-d invariant subspace of a sliced inverse-moment kernel, mapped back
/// from the standardized scale. kind: 0 = SIR (between-slice means),
/// 1 = SAVE (within-slice covariance deviations).
template <typename Scalar>
SpectralSubspace<Scalar> spectral_subspace(const Mat<Scalar>& data,
                                           const SliceAssignment& assignment, Index d, int kind,
                                           const char* what) {
  const Index n = data.rows(), p = data.cols();
  const Vec<Scalar> mean = data.colwise().mean().transpose();
  const Mat<Scalar> centered = data.rowwise() - mean.transpose();
  const Mat<Scalar> cov = (centered.transpose() * centered) / Scalar(n);
  const Mat<Scalar> whiten = inverse_sqrt_spd(cov, what);
  const Mat<Scalar> z = centered * whiten;

  Mat<Scalar> kernel = Mat<Scalar>::Zero(p, p);
  for (int m = 0; m < assignment.num_slices; ++m) {
    const Index nm = assignment.counts[static_cast<size_t>(m)];
    Mat<Scalar> rows(nm, p);
    Index r = 0;
    for (Index i = 0; i < n; ++i)
      if (assignment.labels[static_cast<size_t>(i)] == m) rows.row(r++) = z.row(i);
    const Scalar fm = Scalar(assignment.proportions[static_cast<size_t>(m)]);
    if (kind == 0) {
      const Vec<Scalar> zbar = rows.colwise().mean().transpose();
      kernel += fm * (zbar * zbar.transpose());
    } else {
      const Vec<Scalar> zbar = rows.colwise().mean().transpose();
      rows.rowwise() -= zbar.transpose();
      const Mat<Scalar> within = (rows.transpose() * rows) / Scalar(nm);
      const Mat<Scalar> dev = Mat<Scalar>::Identity(p, p) - within;
      kernel += fm * dev * dev;
    }
  }

  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(kernel);
  Mat<Scalar> directions(p, d);
  Vec<Scalar> top(d);
  for (Index j = 0; j < d; ++j) {
    directions.col(j) = es.eigenvectors().col(p - 1 - j);
    top[j] = es.eigenvalues()[p - 1 - j];
  }
  SpectralSubspace<Scalar> out{GrassmannPoint<Scalar>::orthonormalized(whiten * directions),
                               std::move(top), true};
  out.informative = out.top_eigenvalues[0] > Scalar(1e-10);
  return out;
}

}  // namespace detail

/// Method-of-moments estimate of E{Var(W|y)} from the naive LAD basis:
///   Delta_n = {Psi (Psi' Dt Psi)^{-1} Psi' + S^{-1} - Psi (Psi' S Psi)^{-1} Psi'}^{-1}
/// with Dt the pooled within-slice covariance and S the marginal covariance,
/// followed by Delta = repair(Delta_n - Sigma_u) and L = Delta (Delta + Sigma_u)^{-1}.
template <typename Scalar>
DeltaEstimate<Scalar> estimate_delta(const SymmetricMatrix<Scalar>& sigma_u,
                                     const GrassmannPoint<Scalar>& naive_basis,
                                     const SlicedMoments<Scalar>& moments,
                                     Scalar pd_floor_scale = Scalar(1e-6)) {
  const Mat<Scalar>& psi = naive_basis.basis;
  const Mat<Scalar>& pooled = moments.pooled_within_cov;
  const Mat<Scalar>& marginal = moments.marginal_cov;
  const Index p = marginal.rows();

  Eigen::LLT<Mat<Scalar>> marg_llt(marginal);
  if (marg_llt.info() != Eigen::Success)
    throw DegeneracyError("estimate_delta: marginal covariance is singular");

  const auto quad_inv = [&psi](const Mat<Scalar>& a) {
    const Mat<Scalar> inner = psi.transpose() * a * psi;
    Eigen::LLT<Mat<Scalar>> llt(inner);
    if (llt.info() != Eigen::Success)
      throw DegeneracyError("estimate_delta: projected covariance is not positive definite");
    return (psi * llt.solve(psi.transpose())).eval();
  };

  const Mat<Scalar> inv_sum = quad_inv(pooled) +
                              marg_llt.solve(Mat<Scalar>::Identity(p, p)) - quad_inv(marginal);
  Eigen::LLT<Mat<Scalar>> sum_llt((((inv_sum + inv_sum.transpose()) / Scalar(2))).eval());
  if (sum_llt.info() != Eigen::Success)
    throw DegeneracyError("estimate_delta: moment combination is not positive definite");
  Mat<Scalar> delta_n = sum_llt.solve(Mat<Scalar>::Identity(p, p));
  delta_n = ((delta_n + delta_n.transpose()) / Scalar(2)).eval();

  if (sigma_u.m().isZero(Scalar(0))) {
    // No measurement error: the adjustment collapses to the identity.
    return {SymmetricMatrix<Scalar>(delta_n), SymmetricMatrix<Scalar>(delta_n),
            Mat<Scalar>::Identity(p, p)};
  }

  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es((delta_n - sigma_u.m()).eval());
  Vec<Scalar> ev = es.eigenvalues();
  const Scalar floor = pd_floor_scale * std::max(ev.maxCoeff(), Scalar(1));
  if (ev.maxCoeff() < floor)
    throw DegeneracyError(
        "estimate_delta: measurement-error covariance dominates the conditional covariance");
  for (Index i = 0; i < p; ++i) ev[i] = std::max(ev[i], floor);
  Mat<Scalar> delta = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  delta = ((delta + delta.transpose()) / Scalar(2)).eval();

  Eigen::LLT<Mat<Scalar>> den_llt((delta + sigma_u.m()).eval());
  if (den_llt.info() != Eigen::Success)
    throw DegeneracyError("estimate_delta: Delta + Sigma_u is not positive definite");
  const Mat<Scalar> l_hat = den_llt.solve(delta).transpose();  // Delta (Delta+Sigma_u)^{-1}
  return {SymmetricMatrix<Scalar>(delta_n), SymmetricMatrix<Scalar>(delta), l_hat};
}

namespace detail {

template <typename Scalar>
SubspaceEstimate<Scalar> from_trust_region(TrustRegionResult<Scalar> r, MethodTag tag) {
  SubspaceEstimate<Scalar> est{std::move(r.point), {}, r.value, r.converged, r.iterations, tag,
                               r.grad_norm};
  est.projection = est.basis.projection();
  return est;
}

template <typename Scalar>
SubspaceEstimate<Scalar> maximize_sliced_logdet(const LikelihoodMatrices<Scalar>& lm,
                                                const GrassmannPoint<Scalar>& init, MethodTag tag,
                                                const TrustRegionOptions<Scalar>& opts) {
  auto objective = [&lm](const Mat<Scalar>& psi) { return sliced_logdet_objective(psi, lm); };
  return from_trust_region(trust_region_maximize(objective, init, opts), tag);
}

}  // namespace detail

/// Naive LAD: maximize the sliced log-determinant likelihood of the raw data,
/// initialized at the SAVE subspace of the same data.
template <typename Scalar>
SubspaceEstimate<Scalar> fit_lad(const Mat<Scalar>& data, const Vec<Scalar>& y, Index d,
                                 int num_slices, bool y_is_categorical = false,
                                 const TrustRegionOptions<Scalar>& opts = {}) {
  GrassmannPoint<Scalar>::check_shape(data.cols(), d);
  const SliceAssignment assignment =
      slice_response(y, num_slices, y_is_categorical, static_cast<int>(d) + 2);
  const SlicedMoments<Scalar> moments = slice_covariances(data, assignment);
  const auto init = detail::spectral_subspace(data, assignment, d, 1, "fit_lad");
  return detail::maximize_sliced_logdet(lad_matrices(moments), init.basis, MethodTag::LAD, opts);
}

template <typename Scalar>
SubspaceEstimate<Scalar> fit_lad(const SurrogateProblem<Scalar>& problem,
                                 const TrustRegionOptions<Scalar>& opts = {}) {
  problem.validate();
  return fit_lad(problem.W, problem.y, problem.d, problem.num_slices, problem.y_is_categorical,
                 opts);
}

/// Full corrected-LAD pipeline record; fit_clad returns its estimate.
template <typename Scalar>
struct CladFit {
  SubspaceEstimate<Scalar> estimate;
  SubspaceEstimate<Scalar> naive;
  DeltaEstimate<Scalar> delta;
  SlicedMoments<Scalar> moments;
  LikelihoodMatrices<Scalar> matrices;  // L-hat conjugated moments
};

template <typename Scalar>
CladFit<Scalar> fit_clad_detailed(const SurrogateProblem<Scalar>& problem,
                                  const TrustRegionOptions<Scalar>& opts = {}) {
  problem.validate();
  const SliceAssignment assignment = slice_response(
      problem.y, problem.num_slices, problem.y_is_categorical, static_cast<int>(problem.d) + 2);
  SlicedMoments<Scalar> moments = slice_covariances(problem.W, assignment);

  const auto init = detail::spectral_subspace(problem.W, assignment, problem.d, 1, "fit_clad");
  SubspaceEstimate<Scalar> naive =
      detail::maximize_sliced_logdet(lad_matrices(moments), init.basis, MethodTag::LAD, opts);

  DeltaEstimate<Scalar> delta = estimate_delta(problem.sigma_u, naive.basis, moments);
  LikelihoodMatrices<Scalar> lm = clad_matrices(moments, delta.L_hat);
  SubspaceEstimate<Scalar> est =
      detail::maximize_sliced_logdet(lm, naive.basis, MethodTag::cLAD, opts);
  return {std::move(est), std::move(naive), std::move(delta), std::move(moments), std::move(lm)};
}

template <typename Scalar>
SubspaceEstimate<Scalar> fit_clad(const SurrogateProblem<Scalar>& problem,
                                  const TrustRegionOptions<Scalar>& opts = {}) {
  return fit_clad_detailed(problem, opts).estimate;
}

/// Adjusted covariates X* = Sigma_x Sigma_w^{-1} W with the uncentered
/// second-moment matrix Sigma_w = n^{-1} sum W_i W_i' and
/// Sigma_x = repair(Sigma_w - Sigma_u).
template <typename Scalar>
Mat<Scalar> adjusted_surrogates(const Mat<Scalar>& w, const SymmetricMatrix<Scalar>& sigma_u) {
  const Index n = w.rows();
  const Mat<Scalar> second_moment = (w.transpose() * w) / Scalar(n);
  const Mat<Scalar> sigma_x = pd_repair((second_moment - sigma_u.m()).eval());
  Eigen::LLT<Mat<Scalar>> llt(second_moment);
  if (llt.info() != Eigen::Success)
    throw DegeneracyError("adjusted_surrogates: second-moment matrix is singular");
  const Mat<Scalar> adjust = llt.solve(sigma_x).transpose();  // Sigma_x Sigma_w^{-1}
  return w * adjust.transpose();
}

/// Invariance-law LAD: the LAD fit on the adjusted covariates, initialized at
/// their SAVE subspace.
template <typename Scalar>
SubspaceEstimate<Scalar> fit_il_lad(const SurrogateProblem<Scalar>& problem,
                                    const TrustRegionOptions<Scalar>& opts = {}) {
  problem.validate();
  const Mat<Scalar> xstar = adjusted_surrogates(problem.W, problem.sigma_u);
  const SliceAssignment assignment = slice_response(
      problem.y, problem.num_slices, problem.y_is_categorical, static_cast<int>(problem.d) + 2);
  const SlicedMoments<Scalar> moments = slice_covariances(xstar, assignment);
  const auto init = detail::spectral_subspace(xstar, assignment, problem.d, 1, "fit_il_lad");
  SubspaceEstimate<Scalar> est = detail::maximize_sliced_logdet(lad_matrices(moments), init.basis,
                                                                MethodTag::IL_LAD, opts);
  return est;
}

namespace detail {

template <typename Scalar>
SubspaceEstimate<Scalar> fit_il_spectral(const SurrogateProblem<Scalar>& problem, int kind,
                                         MethodTag tag, const char* what) {
  problem.validate();
  const Mat<Scalar> xstar = adjusted_surrogates(problem.W, problem.sigma_u);
  const SliceAssignment assignment = slice_response(
      problem.y, problem.num_slices, problem.y_is_categorical, static_cast<int>(problem.d) + 2);
  const auto spec = spectral_subspace(xstar, assignment, problem.d, kind, what);
  SubspaceEstimate<Scalar> est{spec.basis,           spec.basis.projection(),
                               spec.top_eigenvalues.sum(), spec.informative,
                               0,                     tag,
                               Scalar(0)};
  return est;
}

}  // namespace detail

/// Sliced inverse regression of the response on the adjusted covariates.
template <typename Scalar>
SubspaceEstimate<Scalar> fit_il_sir(const SurrogateProblem<Scalar>& problem) {
  return detail::fit_il_spectral(problem, 0, MethodTag::IL_SIR, "fit_il_sir");
}

/// Sliced average variance estimation on the adjusted covariates.
template <typename Scalar>
SubspaceEstimate<Scalar> fit_il_save(const SurrogateProblem<Scalar>& problem) {
  return detail::fit_il_spectral(problem, 1, MethodTag::IL_SAVE, "fit_il_save");
}

}  // namespace surrlad
