#pragma once

// Data-generating processes for the simulation study and a scenario runner
// producing per-estimator Monte-Carlo summaries.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "surrlad/estimators.hpp"
#include "surrlad/rng.hpp"
#include "surrlad/sparse.hpp"

namespace surrlad {

enum class SimModel { M1, M2, M3, M4 };
enum class CovariateLaw { Gaussian, HalfGaussian, T3 };

inline std::string to_string(SimModel m) {
  switch (m) {
    case SimModel::M1: return "m1";
    case SimModel::M2: return "m2";
    case SimModel::M3: return "m3";
    case SimModel::M4: return "m4";
  }
  return "?";
}

inline std::string to_string(CovariateLaw law) {
  switch (law) {
    case CovariateLaw::Gaussian: return "gaussian";
    case CovariateLaw::HalfGaussian: return "half_gaussian";
    case CovariateLaw::T3: return "t3";
  }
  return "?";
}

SimModel sim_model_from_string(const std::string& s);
CovariateLaw covariate_law_from_string(const std::string& s);

/// Structural dimension implied by the model: 1 for the single-index models,
/// 2 for the multi-index ones.
inline Eigen::Index model_dimension(SimModel m) {
  return (m == SimModel::M1 || m == SimModel::M2) ? 1 : 2;
}

struct Scenario {
  SimModel model = SimModel::M1;
  CovariateLaw covariate_law = CovariateLaw::Gaussian;
  Eigen::Index n = 1000;
  Eigen::Index p = 40;
  int num_slices = 10;
  int replicates = 100;
  std::uint64_t seed = 1;
  std::vector<MethodTag> estimators;

  Eigen::Index d() const { return model_dimension(model); }

  void validate() const {
    if (p < 5) throw std::invalid_argument("Scenario: need p >= 5");
    if (n <= p) throw std::invalid_argument("Scenario: need n > p");
    if (replicates < 1) throw std::invalid_argument("Scenario: need replicates >= 1");
    if (num_slices < 2) throw std::invalid_argument("Scenario: need slices >= 2");
    if (estimators.empty()) throw std::invalid_argument("Scenario: no estimators requested");
  }
};

/// AR(1) covariance with entries rho^{|i-j|}.
inline Eigen::MatrixXd ar1_covariance(Eigen::Index p, double rho = 0.5) {
  Eigen::MatrixXd s(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j) s(i, j) = std::pow(rho, double(std::abs(i - j)));
  return s;
}

/// beta_1 = (1,1,1,0,...)' for the single-index models; [beta_1, beta_2] with
/// beta_2 = (0,0,1,1,1,0,...)' for the multi-index ones.
inline Eigen::MatrixXd true_directions(Eigen::Index p, SimModel model) {
  if (p < 5) throw std::invalid_argument("true_directions: need p >= 5");
  const Eigen::Index d = model_dimension(model);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, d);
  b(0, 0) = b(1, 0) = b(2, 0) = 1.0;
  if (d == 2) b(2, 1) = b(3, 1) = b(4, 1) = 1.0;
  return b;
}

inline std::set<int> true_support(SimModel model) {
  return model_dimension(model) == 1 ? std::set<int>{0, 1, 2} : std::set<int>{0, 1, 2, 3, 4};
}

/// Draws n rows with the AR(0.5) covariance: Gaussian, multivariate t with 3
/// degrees of freedom scaled so its covariance is exactly Sigma_x, or the
/// entrywise absolute value of the Gaussian draw.
inline Eigen::MatrixXd gen_covariates(CovariateLaw law, Eigen::Index n, Eigen::Index p, Rng& rng) {
  const Eigen::MatrixXd sigma_x = ar1_covariance(p);
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma_x).matrixL();
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row = chol * rng.normal_vector(p);
    if (law == CovariateLaw::T3) {
      // t_3 = N(0, Sigma_x/3) * sqrt(3/chi2_3); covariance = Sigma_x.
      row /= std::sqrt(rng.chisq(3));
    } else if (law == CovariateLaw::HalfGaussian) {
      row = row.cwiseAbs();
    }
    x.row(i) = row.transpose();
  }
  return x;
}

/// The four index-model link functions, evaluated on the index matrix
/// T = X * B (n-by-d) with the given noise vector.
inline Eigen::VectorXd response_from_indices(SimModel model, const Eigen::MatrixXd& indices,
                                             const Eigen::VectorXd& eps) {
  if (indices.cols() != model_dimension(model))
    throw std::invalid_argument("response_from_indices: index count does not match the model");
  if (eps.size() != indices.rows())
    throw std::invalid_argument("response_from_indices: noise length mismatch");
  const Eigen::Index n = indices.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t1 = indices(i, 0);
    switch (model) {
      case SimModel::M1:
        y[i] = 0.5 * t1 * t1 * t1 + 0.25 * std::abs(t1) * eps[i];
        break;
      case SimModel::M2:
        y[i] = 3.0 * t1 / ((1.0 + t1) * (1.0 + t1)) + 0.25 * eps[i];
        break;
      case SimModel::M3:
        y[i] = 4.0 * std::sin(indices(i, 1) / 4.0) + 0.5 * t1 * t1 + 0.25 * eps[i];
        break;
      case SimModel::M4:
        y[i] = 3.0 * t1 * std::exp(indices(i, 1) + 0.25 * eps[i]);
        break;
    }
  }
  return y;
}

inline Eigen::VectorXd gen_response_with_noise(SimModel model, const Eigen::MatrixXd& x,
                                               const Eigen::MatrixXd& b_true,
                                               const Eigen::VectorXd& eps) {
  return response_from_indices(model, x * b_true, eps);
}

inline Eigen::VectorXd gen_response(SimModel model, const Eigen::MatrixXd& x,
                                    const Eigen::MatrixXd& b_true, Rng& rng) {
  return gen_response_with_noise(model, x, b_true, rng.normal_vector(x.rows()));
}

struct SurrogateDraw {
  Eigen::MatrixXd W;
  Eigen::VectorXd sigma_u_diag;  // variances of the measurement errors
};

/// W = X + U with U ~ N(0, Sigma_u), Sigma_u = diag(u_1^2, ..., u_p^2) and
/// u_j ~ U(0.2, 0.5) drawn once per dataset. The uniform draws act as the
/// error standard deviations; this scaling is what reproduces the reported
/// estimation errors.
inline SurrogateDraw gen_surrogates(const Eigen::MatrixXd& x, Rng& rng) {
  const Eigen::Index n = x.rows(), p = x.cols();
  Eigen::VectorXd var(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double sd = rng.uniform(0.2, 0.5);
    var[j] = sd * sd;
  }
  Eigen::MatrixXd w = x;
  const Eigen::VectorXd sd = var.cwiseSqrt();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) w(i, j) += sd[j] * rng.normal();
  return {std::move(w), std::move(var)};
}

struct GeneratedDataset {
  Eigen::MatrixXd X;
  Eigen::MatrixXd W;
  Eigen::VectorXd y;
  Eigen::VectorXd sigma_u_diag;
  Eigen::MatrixXd B_true;
};

inline GeneratedDataset generate_dataset(SimModel model, CovariateLaw law, Eigen::Index n,
                                         Eigen::Index p, Rng& rng) {
  GeneratedDataset ds;
  ds.B_true = true_directions(p, model);
  ds.X = gen_covariates(law, n, p, rng);
  ds.y = gen_response(model, ds.X, ds.B_true, rng);
  SurrogateDraw draw = gen_surrogates(ds.X, rng);
  ds.W = std::move(draw.W);
  ds.sigma_u_diag = std::move(draw.sigma_u_diag);
  return ds;
}

struct EstimatorSummary {
  MethodTag method = MethodTag::cLAD;
  int completed = 0;
  int failures = 0;
  double mean_error = 0.0;
  double se_error = 0.0;
  bool has_f1 = false;
  double mean_f1 = 0.0;
  double se_f1 = 0.0;
};

struct ScenarioSummary {
  Scenario scenario;
  std::vector<EstimatorSummary> estimators;
};

/// Runs the scenario's replicates (in parallel over a worker pool), fitting
/// every requested estimator with the true Sigma_u and known d, and reduces
/// projection errors (and selection F1 for scLAD) to means and standard
/// errors. Per-replicate failures are counted and excluded.
ScenarioSummary run_scenario(const Scenario& scenario,
                             const SparseOptions<double>& sparse_opts = {},
                             int threads = 0);

std::string summary_to_csv(const ScenarioSummary& summary);
std::string summary_to_text(const ScenarioSummary& summary);

}  // namespace surrlad
