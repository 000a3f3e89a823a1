#pragma once

// Shared test utilities: deterministic random matrices, a central-difference
// gradient oracle, an inverse-regression population model satisfying the
// central-subspace conditions exactly, and a small OLS helper.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "surrlad/rng.hpp"

namespace testutil {

inline Eigen::MatrixXd random_matrix(surrlad::Rng& rng, Eigen::Index r, Eigen::Index c) {
  return rng.normal_matrix(r, c);
}

inline Eigen::MatrixXd random_orthogonal(surrlad::Rng& rng, Eigen::Index p) {
  const Eigen::MatrixXd a = rng.normal_matrix(p, p);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index i = 0; i < p; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  return q;
}

inline Eigen::MatrixXd random_semi_orthogonal(surrlad::Rng& rng, Eigen::Index p, Eigen::Index d) {
  return random_orthogonal(rng, p).leftCols(d);
}

/// SPD matrix with eigenvalues spread over [lo, hi].
inline Eigen::MatrixXd random_spd(surrlad::Rng& rng, Eigen::Index p, double lo = 0.5,
                                  double hi = 3.0) {
  const Eigen::MatrixXd q = random_orthogonal(rng, p);
  Eigen::VectorXd ev(p);
  for (Eigen::Index i = 0; i < p; ++i) ev[i] = rng.uniform(lo, hi);
  return q * ev.asDiagonal() * q.transpose();
}

/// Central-difference gradient of a scalar function of a matrix argument.
template <typename F>
Eigen::MatrixXd fd_gradient(F&& f, const Eigen::MatrixXd& at, double h = 1e-5) {
  Eigen::MatrixXd g(at.rows(), at.cols());
  Eigen::MatrixXd x = at;
  for (Eigen::Index i = 0; i < at.rows(); ++i)
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      const double orig = x(i, j);
      x(i, j) = orig + h;
      const double fp = f(x);
      x(i, j) = orig - h;
      const double fm = f(x);
      x(i, j) = orig;
      g(i, j) = (fp - fm) / (2.0 * h);
    }
  return g;
}

/// Population Gaussian inverse-regression model with a one-dimensional
/// central subspace: X | (slice m) ~ N(mu_m, Delta_m) with
/// mu_m = v_m * Delta psi, Delta_m = Delta + D_m (Delta psi)(Delta psi)',
/// sum f_m v_m = 0 and sum f_m D_m = 0, so E{Var(X|y)} = Delta and the
/// conditional-independence conditions hold with basis psi exactly.
struct PopulationModel {
  Eigen::VectorXd psi;                    // unit basis of the central subspace
  Eigen::MatrixXd psi0;                   // orthogonal complement
  Eigen::MatrixXd delta;                  // E{Var(X|y)}
  std::vector<Eigen::MatrixXd> delta_m;   // within-slice covariances of X
  std::vector<Eigen::VectorXd> mu_m;      // within-slice means of X
  std::vector<double> f;                  // slice probabilities
  Eigen::MatrixXd sigma_x;                // marginal covariance of X
  Eigen::MatrixXd sigma_u;
  Eigen::MatrixXd sigma_w;                // sigma_x + sigma_u
  std::vector<Eigen::MatrixXd> delta_wm;  // delta_m + sigma_u
  Eigen::MatrixXd l_true;                 // delta (delta + sigma_u)^{-1}

  int num_slices() const { return static_cast<int>(f.size()); }
  Eigen::Index p() const { return psi.size(); }
};

enum class SigmaUKind { ProportionalToDelta, Diagonal, Zero };

inline PopulationModel make_population_model(SigmaUKind kind, double mean_scale = 1.0) {
  const Eigen::Index p = 4;
  PopulationModel m;
  m.psi = Eigen::Vector4d(1.0, 0.5, -0.5, 0.2).normalized();

  surrlad::Rng rng(173501);
  Eigen::MatrixXd full(p, p);
  full.col(0) = m.psi;
  full.rightCols(p - 1) = rng.normal_matrix(p, p - 1);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(full);
  Eigen::MatrixXd q = qr.householderQ();
  if ((q.col(0) - m.psi).norm() > 1.0) q.col(0) = -q.col(0);
  m.psi0 = q.rightCols(p - 1);

  Eigen::MatrixXd s = rng.normal_matrix(p, p);
  s = ((s + s.transpose()) / 2.0).eval();
  s /= std::max(1.0, s.cwiseAbs().maxCoeff());
  m.delta = Eigen::MatrixXd::Identity(p, p) + 0.3 * s;

  m.f = {0.3, 0.3, 0.4};
  const std::vector<double> v = {-1.0 * mean_scale, 0.4 * mean_scale, 0.45 * mean_scale};
  const std::vector<double> dcoef = {0.8, -0.35, -0.3375};
  const Eigen::VectorXd dpsi = m.delta * m.psi;

  m.sigma_x = Eigen::MatrixXd::Zero(p, p);
  for (int k = 0; k < 3; ++k) {
    m.delta_m.push_back(m.delta + dcoef[k] * (dpsi * dpsi.transpose()));
    Eigen::LLT<Eigen::MatrixXd> llt(m.delta_m.back());
    if (llt.info() != Eigen::Success) throw std::logic_error("population model: Delta_m not PD");
    m.mu_m.push_back(v[k] * dpsi);
    m.sigma_x += m.f[k] * (m.delta_m.back() + m.mu_m.back() * m.mu_m.back().transpose());
  }

  switch (kind) {
    case SigmaUKind::ProportionalToDelta: m.sigma_u = 0.3 * m.delta; break;
    case SigmaUKind::Diagonal:
      m.sigma_u = Eigen::Vector4d(0.3, 0.45, 0.2, 0.35).asDiagonal();
      break;
    case SigmaUKind::Zero: m.sigma_u = Eigen::MatrixXd::Zero(p, p); break;
  }
  m.sigma_w = m.sigma_x + m.sigma_u;
  for (int k = 0; k < 3; ++k) m.delta_wm.push_back(m.delta_m[k] + m.sigma_u);
  m.l_true =
      (m.delta + m.sigma_u).llt().solve(m.delta).transpose();  // Delta (Delta+Sigma_u)^{-1}
  return m;
}

struct PopulationSample {
  Eigen::MatrixXd X;
  Eigen::MatrixXd W;
  Eigen::VectorXd y;  // slice index as a categorical response
};

inline PopulationSample sample_population(const PopulationModel& m, Eigen::Index n,
                                          surrlad::Rng& rng) {
  const Eigen::Index p = m.p();
  std::vector<Eigen::MatrixXd> chol;
  for (const auto& dm : m.delta_m) chol.push_back(Eigen::LLT<Eigen::MatrixXd>(dm).matrixL());
  const bool noise = m.sigma_u.norm() > 0;
  Eigen::MatrixXd chol_u;
  if (noise) chol_u = Eigen::LLT<Eigen::MatrixXd>(m.sigma_u).matrixL();

  PopulationSample out;
  out.X.resize(n, p);
  out.W.resize(n, p);
  out.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    int k = 0;
    double acc = m.f[0];
    while (k + 1 < m.num_slices() && u >= acc) acc += m.f[static_cast<size_t>(++k)];
    const Eigen::VectorXd x = m.mu_m[static_cast<size_t>(k)] + chol[static_cast<size_t>(k)] * rng.normal_vector(p);
    out.X.row(i) = x.transpose();
    out.y[i] = double(k);
    if (noise)
      out.W.row(i) = (x + chol_u * rng.normal_vector(p)).transpose();
    else
      out.W.row(i) = x.transpose();
  }
  return out;
}

struct OlsFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd tstat;
};

inline OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
  const Eigen::Index n = design.rows(), k = design.cols();
  const Eigen::MatrixXd gram = design.transpose() * design;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  OlsFit fit;
  fit.coef = llt.solve(design.transpose() * response);
  const Eigen::VectorXd resid = response - design * fit.coef;
  const double sigma2 = resid.squaredNorm() / double(n - k);
  const Eigen::MatrixXd cov = sigma2 * llt.solve(Eigen::MatrixXd::Identity(k, k));
  fit.tstat.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) fit.tstat[j] = fit.coef[j] / std::sqrt(cov(j, j));
  return fit;
}

}  // namespace testutil
