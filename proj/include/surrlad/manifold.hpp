#pragma once

// Grassmann-manifold geometry and a trust-region maximizer for smooth
// objectives with closed-form Euclidean gradients. Subspaces are represented
// by semi-orthogonal p-by-d bases; the inner subproblem is solved by
// truncated conjugate gradients with a finite-difference Hessian action.

#include <cmath>
#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "surrlad/common.hpp"
#include "surrlad/rng.hpp"

namespace surrlad {

/// A point on the Grassmann manifold G(d, p): the subspace spanned by a
/// semi-orthogonal p-by-d basis matrix.
template <typename Scalar>
struct GrassmannPoint {
  Mat<Scalar> basis;

  Index p() const { return basis.rows(); }
  Index d() const { return basis.cols(); }
  Mat<Scalar> projection() const { return basis * basis.transpose(); }

  /// Wraps a basis after validating 1 <= d < p and semi-orthogonality.
  static GrassmannPoint from_basis(Mat<Scalar> b, Scalar orth_tol = Scalar(1e-10)) {
    check_shape(b.rows(), b.cols());
    const Scalar err = (b.transpose() * b - Mat<Scalar>::Identity(b.cols(), b.cols())).norm();
    if (err > orth_tol) {
      std::ostringstream os;
      os << "GrassmannPoint: basis is not semi-orthogonal (||Psi'Psi - I||_F = " << err << ")";
      throw std::invalid_argument(os.str());
    }
    return GrassmannPoint{std::move(b)};
  }

  /// Wraps the thin-QR orthonormalization of an arbitrary full-rank matrix.
  static GrassmannPoint orthonormalized(const Mat<Scalar>& b);

  static void check_shape(Index p, Index d) {
    if (d < 1 || d >= p) throw std::invalid_argument("GrassmannPoint: need 1 <= d < p");
  }
};

/// Objective value together with its Euclidean (ambient-space) gradient.
template <typename Scalar>
struct ObjectiveEvaluation {
  Scalar value;
  Mat<Scalar> euclidean_gradient;  // p-by-d
};

template <typename Scalar>
struct TrustRegionOptions {
  int max_outer_iters = 200;
  Scalar grad_tol = Scalar(1e-6);    // Riemannian gradient Frobenius norm
  Scalar initial_radius = Scalar(0); // <= 0: use 0.5 * sqrt(d)
  Scalar max_radius = Scalar(0);     // <= 0: use 2 * sqrt(d)
  Scalar rho_accept = Scalar(0.1);
  Scalar rho_expand = Scalar(0.75);
  Scalar fd_step = Scalar(1e-6);
  int max_inner_iters = 0;           // <= 0: use d * (p - d)

  TrustRegionOptions<Scalar> resolved(Index p, Index d) const {
    TrustRegionOptions<Scalar> o = *this;
    const Scalar sd = std::sqrt(Scalar(d));
    if (o.initial_radius <= Scalar(0)) o.initial_radius = Scalar(0.5) * sd;
    if (o.max_radius <= Scalar(0)) o.max_radius = Scalar(2) * sd;
    if (o.max_inner_iters <= 0) o.max_inner_iters = static_cast<int>(d * (p - d));
    o.validate();
    return o;
  }

  void validate() const {
    if (!(Scalar(0) < rho_accept && rho_accept < rho_expand && rho_expand < Scalar(1)))
      throw std::invalid_argument("TrustRegionOptions: need 0 < rho_accept < rho_expand < 1");
    if (grad_tol <= Scalar(0) || fd_step <= Scalar(0) || initial_radius <= Scalar(0) ||
        max_radius <= Scalar(0) || max_radius < initial_radius)
      throw std::invalid_argument("TrustRegionOptions: tolerances and radii must be positive");
    if (max_outer_iters < 1 || max_inner_iters < 1)
      throw std::invalid_argument("TrustRegionOptions: iteration caps must be >= 1");
  }
};

/// (I - Psi Psi^T) G: orthogonal projection of an ambient direction onto the
/// tangent space at the given point.
template <typename Scalar, typename Derived>
Mat<Scalar> project_tangent(const GrassmannPoint<Scalar>& point,
                            const Eigen::MatrixBase<Derived>& g) {
  if (g.rows() != point.p() || g.cols() != point.d())
    throw std::invalid_argument("project_tangent: direction shape does not match the point");
  return g - point.basis * (point.basis.transpose() * g);
}

/// QR retraction: the subspace spanned by the orthonormalization of Psi + xi,
/// with the R-diagonal sign fixed so that retract(point, 0) == point.
template <typename Scalar>
GrassmannPoint<Scalar> retract(const GrassmannPoint<Scalar>& point, const Mat<Scalar>& xi) {
  if (xi.rows() != point.p() || xi.cols() != point.d())
    throw std::invalid_argument("retract: tangent shape does not match the point");
  const Mat<Scalar> sum = point.basis + xi;
  Eigen::HouseholderQR<Mat<Scalar>> qr(sum);
  Mat<Scalar> q = qr.householderQ() * Mat<Scalar>::Identity(point.p(), point.d());
  const Mat<Scalar> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  const Scalar rank_floor = Scalar(1e-12) * std::max(sum.norm(), Scalar(1));
  for (Index i = 0; i < point.d(); ++i) {
    if (std::abs(r(i, i)) <= rank_floor)
      throw DegeneracyError("retract: Psi + xi is numerically rank-deficient");
    if (r(i, i) < Scalar(0)) q.col(i) = -q.col(i);
  }
  return GrassmannPoint<Scalar>{std::move(q)};
}

template <typename Scalar>
GrassmannPoint<Scalar> GrassmannPoint<Scalar>::orthonormalized(const Mat<Scalar>& b) {
  check_shape(b.rows(), b.cols());
  GrassmannPoint<Scalar> origin{Mat<Scalar>::Zero(b.rows(), b.cols())};
  // Reuse the rank-checked QR path; the zero "basis" is never validated.
  return retract(origin, b);
}

namespace detail {

/// Finite-difference Hessian action given a precomputed Riemannian gradient
/// at the base point: project the gradient at a retracted probe point back to
/// the base tangent space and form the difference quotient.
template <typename Scalar, typename Objective>
Mat<Scalar> fd_hessian_apply_cached(Objective&& objective, const GrassmannPoint<Scalar>& point,
                                    const Mat<Scalar>& rgrad, const Mat<Scalar>& xi,
                                    Scalar fd_step) {
  const Scalar nx = xi.norm();
  if (nx == Scalar(0)) return Mat<Scalar>::Zero(point.p(), point.d());
  const GrassmannPoint<Scalar> probe = retract(point, ((fd_step / nx) * xi).eval());
  const ObjectiveEvaluation<Scalar> ev = objective(probe.basis);
  const Mat<Scalar> rgrad_probe = project_tangent(probe, ev.euclidean_gradient);
  return (project_tangent(point, rgrad_probe) - rgrad) * (nx / fd_step);
}

}  // namespace detail

/// Finite-difference approximation of the Riemannian Hessian applied to a
/// tangent direction xi.
template <typename Scalar, typename Objective>
Mat<Scalar> fd_hessian_apply(Objective&& objective, const GrassmannPoint<Scalar>& point,
                             const Mat<Scalar>& xi, Scalar fd_step = Scalar(1e-6)) {
  const ObjectiveEvaluation<Scalar> ev = objective(point.basis);
  const Mat<Scalar> rgrad = project_tangent(point, ev.euclidean_gradient);
  return detail::fd_hessian_apply_cached(objective, point, rgrad, xi, fd_step);
}

template <typename Scalar>
struct TrustRegionStep {
  Scalar value;      // objective after this outer iteration
  Scalar rho;        // improvement quotient of the proposed step
  Scalar radius;     // radius used when proposing the step
  Scalar step_norm;  // tangent norm of the proposed step
  bool accepted;
};

template <typename Scalar>
struct TrustRegionResult {
  GrassmannPoint<Scalar> point;
  Scalar value;
  Scalar grad_norm;
  int iterations;
  bool converged;
  std::vector<TrustRegionStep<Scalar>> history;
};

/// Maximizes the objective over the Grassmann manifold by a trust-region
/// method: truncated-CG subproblem in the tangent space, QR retraction,
/// finite-difference Hessian action, and the usual three-way
/// accept-and-expand / accept / reject-and-shrink radius rule.
template <typename Scalar, typename Objective>
TrustRegionResult<Scalar> trust_region_maximize(Objective&& objective,
                                                const GrassmannPoint<Scalar>& init,
                                                const TrustRegionOptions<Scalar>& options = {}) {
  const Index p = init.p(), d = init.d();
  const TrustRegionOptions<Scalar> opts = options.resolved(p, d);

  GrassmannPoint<Scalar> point = init;
  ObjectiveEvaluation<Scalar> ev = objective(point.basis);
  if (!std::isfinite(ev.value))
    throw std::invalid_argument("trust_region_maximize: objective is not finite at init");

  const auto frob = [](const Mat<Scalar>& a, const Mat<Scalar>& b) {
    return (a.array() * b.array()).sum();
  };

  TrustRegionResult<Scalar> result{point, ev.value, Scalar(0), 0, false, {}};
  Scalar radius = opts.initial_radius;
  int escape_attempts = 0;
  Rng probe_rng(0x5eed5eedULL);
  const auto probe_direction = [&]() {
    Mat<Scalar> v(p, d);
    for (Index i = 0; i < p; ++i)
      for (Index j = 0; j < d; ++j) v(i, j) = Scalar(probe_rng.normal());
    return v;
  };

  for (int outer = 0; outer < opts.max_outer_iters; ++outer) {
    const Mat<Scalar> rgrad = project_tangent(point, ev.euclidean_gradient);
    const Scalar gnorm = rgrad.norm();
    result.grad_norm = gnorm;

    const auto hess = [&](const Mat<Scalar>& v) {
      return detail::fd_hessian_apply_cached(objective, point, rgrad, v, opts.fd_step);
    };

    if (gnorm <= opts.grad_tol) {
      // First-order critical. Probe the Hessian for positive curvature so a
      // strict saddle (e.g. a non-dominant eigenvector of a Rayleigh trace)
      // does not count as converged; escape steps must strictly improve.
      bool escaped = false;
      if (escape_attempts < 2) {
        ++escape_attempts;
        Mat<Scalar> v = project_tangent(point, probe_direction());
        if (v.norm() > Scalar(0)) {
          v /= v.norm();
          Scalar rayleigh = Scalar(0);
          for (int it = 0; it < 12; ++it) {  // dominant |eigenvalue| direction
            Mat<Scalar> hv = project_tangent(point, hess(v));
            rayleigh = frob(v, hv);
            const Scalar nhv = hv.norm();
            if (nhv <= Scalar(1e-300)) break;
            v = hv / nhv;
          }
          if (rayleigh < Scalar(0)) {  // re-aim at the most positive eigenvalue
            const Scalar shift = Scalar(1.1) * std::abs(rayleigh);
            for (int it = 0; it < 25; ++it) {
              Mat<Scalar> hv = project_tangent(point, hess(v)) + shift * v;
              const Scalar nhv = hv.norm();
              if (nhv <= Scalar(1e-300)) break;
              v = hv / nhv;
            }
            rayleigh = frob(v, project_tangent(point, hess(v)));
          }
          const Scalar curv_tol = Scalar(1e-7) * std::max(Scalar(1), std::abs(ev.value));
          if (rayleigh > curv_tol) {
            for (Scalar tau : {radius, radius / 4, radius / 16}) {
              for (Scalar sign : {Scalar(1), Scalar(-1)}) {
                const GrassmannPoint<Scalar> cand = retract(point, (sign * tau * v).eval());
                ObjectiveEvaluation<Scalar> cev;
                try {
                  cev = objective(cand.basis);
                } catch (const DegeneracyError&) {
                  continue;
                }
                if (std::isfinite(cev.value) && cev.value > ev.value) {
                  point = cand;
                  ev = std::move(cev);
                  result.point = point;
                  result.value = ev.value;
                  escaped = true;
                  escape_attempts = 0;  // real progress refreshes the probe budget
                  break;
                }
              }
              if (escaped) break;
            }
          }
        }
      }
      if (!escaped) {
        result.converged = true;
        break;
      }
      result.iterations = outer + 1;
      continue;
    }

    // Steihaug-Toint truncated CG on the maximization model
    //   m(eta) = <rgrad, eta> + 0.5 <eta, H eta>,
    // written as the usual minimization of -m.
    Mat<Scalar> eta = Mat<Scalar>::Zero(p, d);
    Mat<Scalar> resid = -rgrad;  // gradient of -m at eta = 0
    Mat<Scalar> dir = rgrad;
    Scalar rr = frob(resid, resid);
    const Scalar r0_norm = std::sqrt(rr);
    const Scalar cg_tol = r0_norm * std::min(r0_norm, Scalar(0.1));
    for (int inner = 0; inner < opts.max_inner_iters; ++inner) {
      const Mat<Scalar> hd = hess(dir);
      const Scalar curvature = -frob(dir, hd);  // curvature of -m along dir
      const Scalar dd = frob(dir, dir);
      if (dd == Scalar(0)) break;
      if (curvature <= Scalar(0)) {
        // Non-convex model direction: follow it to the boundary.
        const Scalar ee = frob(eta, eta), ed = frob(eta, dir);
        const Scalar tau =
            (-ed + std::sqrt(ed * ed + dd * (radius * radius - ee))) / dd;
        eta += tau * dir;
        break;
      }
      const Scalar alpha = rr / curvature;
      const Mat<Scalar> eta_next = eta + alpha * dir;
      if (eta_next.norm() >= radius) {
        const Scalar ee = frob(eta, eta), ed = frob(eta, dir);
        const Scalar tau =
            (-ed + std::sqrt(ed * ed + dd * (radius * radius - ee))) / dd;
        eta += tau * dir;
        break;
      }
      eta = eta_next;
      resid -= alpha * hd;
      const Scalar rr_next = frob(resid, resid);
      if (std::sqrt(rr_next) <= cg_tol) break;
      dir = -resid + (rr_next / rr) * dir;
      rr = rr_next;
    }
    eta = project_tangent(point, eta);  // guard against tangency drift

    const Scalar step_norm = eta.norm();
    const Scalar predicted = frob(rgrad, eta) + Scalar(0.5) * frob(eta, hess(eta));

    bool accepted = false;
    Scalar rho = -std::numeric_limits<Scalar>::infinity();
    bool nonfinite_candidate = false;
    Scalar candidate_value = std::numeric_limits<Scalar>::quiet_NaN();
    GrassmannPoint<Scalar> candidate{Mat<Scalar>()};
    ObjectiveEvaluation<Scalar> cand_ev;
    if (step_norm > Scalar(0) && predicted > Scalar(0)) {
      candidate = retract(point, eta);
      try {
        cand_ev = objective(candidate.basis);
        candidate_value = cand_ev.value;
      } catch (const DegeneracyError&) {
        candidate_value = std::numeric_limits<Scalar>::quiet_NaN();
      }
      if (std::isfinite(candidate_value)) {
        const Scalar reg = Scalar(1e-13) * std::max(Scalar(1), std::abs(ev.value));
        rho = (candidate_value - ev.value + reg) / (predicted + reg);
        accepted = rho > opts.rho_accept;
      } else {
        nonfinite_candidate = true;
      }
    }

    result.history.push_back({accepted ? candidate_value : ev.value, rho, radius, step_norm,
                              accepted});
    result.iterations = outer + 1;

    if (accepted) {
      point = std::move(candidate);
      ev = std::move(cand_ev);
      result.point = point;
      result.value = ev.value;
      if (rho > opts.rho_expand && step_norm >= Scalar(0.99) * radius)
        radius = std::min(Scalar(2) * radius, opts.max_radius);
    } else {
      radius /= Scalar(2);
      if (radius < Scalar(1e-14)) {
        if (nonfinite_candidate)
          throw DegeneracyError(
              "trust_region_maximize: radius underflow while the objective is non-finite");
        break;  // model cannot improve at machine scale; report best point
      }
    }
  }

  if (!result.converged) {
    const Mat<Scalar> rgrad = project_tangent(result.point, ev.euclidean_gradient);
    result.grad_norm = rgrad.norm();
    result.converged = result.grad_norm <= opts.grad_tol;
  }
  return result;
}

}  // namespace surrlad
