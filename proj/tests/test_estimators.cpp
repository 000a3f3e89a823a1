#include <doctest.h>

#include "surrlad/estimators.hpp"

#include "surrlad/evalmetrics.hpp"
#include "surrlad/simlab.hpp"

#include "helpers.hpp"

using namespace surrlad;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

SlicedMoments<double> moments_from(const MatrixXd& marginal, std::vector<MatrixXd> slices,
                                   std::vector<double> f) {
  SlicedMoments<double> m;
  m.marginal_cov = marginal;
  m.slice_covs = std::move(slices);
  m.proportions = std::move(f);
  const Eigen::Index p = marginal.rows();
  m.grand_mean = VectorXd::Zero(p);
  m.pooled_within_cov = MatrixXd::Zero(p, p);
  for (size_t s = 0; s < m.slice_covs.size(); ++s) {
    m.pooled_within_cov += m.proportions[s] * m.slice_covs[s];
    m.slice_means.push_back(VectorXd::Zero(p));
    m.counts.push_back(1);
  }
  return m;
}

SlicedMoments<double> random_moments(surrlad::Rng& rng, Eigen::Index p, int num_slices) {
  std::vector<MatrixXd> covs;
  std::vector<double> f(static_cast<size_t>(num_slices), 1.0 / num_slices);
  for (int s = 0; s < num_slices; ++s) covs.push_back(testutil::random_spd(rng, p, 0.5, 2.5));
  MatrixXd marginal = testutil::random_spd(rng, p, 1.0, 3.0);
  return moments_from(marginal, std::move(covs), std::move(f));
}

SurrogateProblem<double> population_problem(const testutil::PopulationModel& model,
                                            const testutil::PopulationSample& sample) {
  return SurrogateProblem<double>{sample.W, sample.y, SymmetricMatrix<double>(model.sigma_u), 1, 3,
                                  true};
}

/// Best value over a few fixed trust-region starts; population objectives are
/// low-dimensional, so this reliably hits the global maximizer.
template <typename Matrices>
GrassmannPoint<double> maximize_population(const Matrices& lm, Eigen::Index p, Eigen::Index d) {
  TrustRegionOptions<double> opts;
  opts.grad_tol = 1e-12;
  opts.max_outer_iters = 500;
  auto obj = [&lm](const MatrixXd& psi) { return sliced_logdet_objective(psi, lm); };
  surrlad::Rng rng(1007);
  double best = -1e300;
  GrassmannPoint<double> arg{MatrixXd()};
  for (int restart = 0; restart < 8; ++restart) {
    const auto init =
        GrassmannPoint<double>::from_basis(testutil::random_semi_orthogonal(rng, p, d));
    const auto res = trust_region_maximize(obj, init, opts);
    if (res.value > best) {
      best = res.value;
      arg = res.point;
    }
  }
  return arg;
}

/// Population SAVE on the true covariates of the constructed model.
MatrixXd population_save_projection(const testutil::PopulationModel& m) {
  const Eigen::Index p = m.p();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.sigma_x);
  const MatrixXd isqrt = es.eigenvectors() *
                         es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                         es.eigenvectors().transpose();
  MatrixXd kernel = MatrixXd::Zero(p, p);
  for (int k = 0; k < m.num_slices(); ++k) {
    const MatrixXd dev = MatrixXd::Identity(p, p) - isqrt * m.delta_m[static_cast<size_t>(k)] * isqrt;
    kernel += m.f[static_cast<size_t>(k)] * dev * dev;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> ek(kernel);
  const VectorXd dir = isqrt * ek.eigenvectors().col(p - 1);
  return dir.normalized() * dir.normalized().transpose();
}

}  // namespace

TEST_SUITE_BEGIN("estimators");

TEST_CASE("lad objective vanishes when every slice matches the marginal") {
  surrlad::Rng rng(31);
  const MatrixXd sigma = testutil::random_spd(rng, 5, 0.5, 2.0);
  const auto moments = moments_from(sigma, {sigma, sigma, sigma}, {0.25, 0.5, 0.25});
  for (int trial = 0; trial < 5; ++trial) {
    const auto point =
        GrassmannPoint<double>::from_basis(testutil::random_semi_orthogonal(rng, 5, 2));
    CHECK(std::abs(lad_objective(point, moments).value) <= 1e-12);
  }
}

TEST_CASE("lad objective scalar example") {
  MatrixXd sigma = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  const auto moments = moments_from(sigma, {MatrixXd::Identity(2, 2)}, {1.0});
  MatrixXd e1(2, 1);
  e1 << 1, 0;
  const auto ev = lad_objective(GrassmannPoint<double>::from_basis(e1), moments);
  CHECK(ev.value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("lad and clad gradients match central finite differences") {
  surrlad::Rng rng(32);
  for (int trial = 0; trial < 6; ++trial) {
    const Eigen::Index p = 5, d = (trial % 2) + 1;
    const auto moments = random_moments(rng, p, 4);
    const MatrixXd l_hat =
        MatrixXd::Identity(p, p) + 0.2 * testutil::random_matrix(rng, p, p);
    const auto point =
        GrassmannPoint<double>::from_basis(testutil::random_semi_orthogonal(rng, p, d));

    const auto ev = clad_objective(point, moments, l_hat);
    const MatrixXd fd = testutil::fd_gradient(
        [&](const MatrixXd& psi) {
          return sliced_logdet_objective(psi, clad_matrices(moments, l_hat)).value;
        },
        point.basis);
    CHECK((ev.euclidean_gradient - fd).norm() / fd.norm() <= 1e-5);

    const auto lev = lad_objective(point, moments);
    const MatrixXd lfd = testutil::fd_gradient(
        [&](const MatrixXd& psi) {
          return sliced_logdet_objective(psi, lad_matrices(moments)).value;
        },
        point.basis);
    CHECK((lev.euclidean_gradient - lfd).norm() / lfd.norm() <= 1e-5);
  }
}

TEST_CASE("clad objective with identity L reduces to the lad objective") {
  surrlad::Rng rng(33);
  const auto moments = random_moments(rng, 5, 3);
  const auto point = GrassmannPoint<double>::from_basis(testutil::random_semi_orthogonal(rng, 5, 2));
  const auto a = lad_objective(point, moments);
  const auto b = clad_objective(point, moments, MatrixXd::Identity(5, 5).eval());
  CHECK(std::abs(a.value - b.value) <= 1e-12);
  CHECK((a.euclidean_gradient - b.euclidean_gradient).norm() <= 1e-12);
}

TEST_CASE("objective values are invariant under basis rotation") {
  surrlad::Rng rng(34);
  const auto moments = random_moments(rng, 6, 4);
  const MatrixXd l_hat = MatrixXd::Identity(6, 6) + 0.1 * testutil::random_matrix(rng, 6, 6);
  const auto point = GrassmannPoint<double>::from_basis(testutil::random_semi_orthogonal(rng, 6, 2));
  const double base = clad_objective(point, moments, l_hat).value;
  for (int trial = 0; trial < 100; ++trial) {
    const MatrixXd rot = testutil::random_orthogonal(rng, 2);
    const auto rotated = GrassmannPoint<double>::from_basis((point.basis * rot).eval());
    CHECK(std::abs(clad_objective(rotated, moments, l_hat).value - base) <= 1e-10);
  }
}

TEST_CASE("singular inner matrix raises a degeneracy error naming the slice") {
  MatrixXd sigma = MatrixXd::Identity(3, 3);
  MatrixXd singular = Eigen::Vector3d(0.0, 1.0, 1.0).asDiagonal();
  const auto moments = moments_from(sigma, {singular}, {1.0});
  MatrixXd e1(3, 1);
  e1 << 1, 0, 0;
  CHECK_THROWS_AS(lad_objective(GrassmannPoint<double>::from_basis(e1), moments).value,
                  DegeneracyError);
}

TEST_CASE("estimate_delta: zero measurement error collapses the adjustment") {
  const auto model = testutil::make_population_model(testutil::SigmaUKind::Zero);
  surrlad::Rng rng(35);
  const auto sample = testutil::sample_population(model, 600, rng);
  const auto assignment = slice_response(sample.y, 3, true);
  const auto moments = slice_covariances(sample.W, assignment);
  const auto naive = GrassmannPoint<double>::from_basis(model.psi);
  const auto de = estimate_delta(SymmetricMatrix<double>(model.sigma_u), naive, moments);
  CHECK((de.delta.m() - de.delta_n.m()).norm() == 0.0);
  CHECK((de.L_hat - MatrixXd::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("estimate_delta: pooled == marginal collapses to the marginal") {
  surrlad::Rng rng(36);
  const MatrixXd sigma = testutil::random_spd(rng, 4, 0.5, 2.0);
  const auto moments = moments_from(sigma, {sigma, sigma}, {0.5, 0.5});
  const auto naive = GrassmannPoint<double>::from_basis(testutil::random_semi_orthogonal(rng, 4, 1));
  const auto de = estimate_delta(SymmetricMatrix<double>(MatrixXd::Zero(4, 4)), naive, moments);
  CHECK((de.delta_n.m() - sigma).norm() <= 1e-10);
}

TEST_CASE("estimate_delta recovers E{Var(W|y)} at population moments") {
  // Exactness requires the W-model to satisfy the inverse-regression
  // conditions as well; Sigma_u proportional to Delta guarantees that.
  const auto model = testutil::make_population_model(testutil::SigmaUKind::ProportionalToDelta);
  const Eigen::Index p = model.p();

  std::vector<MatrixXd> wcovs;
  for (int k = 0; k < model.num_slices(); ++k) wcovs.push_back(model.delta_wm[static_cast<size_t>(k)]);
  SlicedMoments<double> pop = moments_from(model.sigma_w, std::move(wcovs), model.f);

  const auto naive = GrassmannPoint<double>::from_basis(model.psi);
  const auto de = estimate_delta(SymmetricMatrix<double>(model.sigma_u), naive, pop);
  CHECK((de.delta_n.m() - (model.delta + model.sigma_u)).norm() <= 1e-8);
  CHECK((de.delta.m() - model.delta).norm() <= 1e-6);
  // L (Delta + Sigma_u) == Delta within 1e-8.
  CHECK((de.L_hat * (de.delta.m() + model.sigma_u) - de.delta.m()).norm() <= 1e-8);
}

TEST_CASE("fit_lad recovers the subspace of an error-free inverse-regression sample") {
  const auto model = testutil::make_population_model(testutil::SigmaUKind::Zero);
  surrlad::Rng rng(37);
  const auto sample = testutil::sample_population(model, 2000, rng);
  const auto est = fit_lad(sample.X, sample.y, 1, 3, true);
  CHECK(est.converged);
  const MatrixXd truth = model.psi * model.psi.transpose();
  CHECK(projection_error(est.projection, truth) <= 0.15);
}

TEST_CASE("fit_lad at d = p-1 keeps the projection invariants") {
  const auto model = testutil::make_population_model(testutil::SigmaUKind::Zero);
  surrlad::Rng rng(38);
  const auto sample = testutil::sample_population(model, 900, rng);
  const auto est = fit_lad(sample.X, sample.y, 3, 3, true);
  CHECK(est.projection.trace() == doctest::Approx(3.0).epsilon(1e-8));
  CHECK((est.projection * est.projection - est.projection).norm() <= 1e-8);
  CHECK((est.projection - est.projection.transpose()).norm() <= 1e-10);
}

TEST_CASE("estimators are equivariant under orthogonal coordinate changes") {
  const auto model = testutil::make_population_model(testutil::SigmaUKind::Diagonal);
  surrlad::Rng rng(39);
  const auto sample = testutil::sample_population(model, 800, rng);
  const MatrixXd q = testutil::random_orthogonal(rng, 4);

  TrustRegionOptions<double> opts;
  opts.grad_tol = 1e-11;

  SurrogateProblem<double> problem{sample.W, sample.y, SymmetricMatrix<double>(model.sigma_u), 1,
                                   3, true};
  SurrogateProblem<double> rotated{sample.W * q, sample.y,
                                   SymmetricMatrix<double>((q.transpose() * model.sigma_u * q).eval()),
                                   1, 3, true};

  const MatrixXd p1 = fit_clad(problem, opts).projection;
  const MatrixXd p2 = fit_clad(rotated, opts).projection;
  CHECK((q.transpose() * p1 * q - p2).norm() <= 1e-6);

  const MatrixXd s1 = fit_il_sir(problem).projection;
  const MatrixXd s2 = fit_il_sir(rotated).projection;
  CHECK((q.transpose() * s1 * q - s2).norm() <= 1e-6);
}

TEST_CASE("fit_clad with zero measurement error equals fit_lad") {
  const auto model = testutil::make_population_model(testutil::SigmaUKind::Zero);
  surrlad::Rng rng(40);
  const auto sample = testutil::sample_population(model, 700, rng);
  SurrogateProblem<double> problem{sample.W, sample.y,
                                   SymmetricMatrix<double>(MatrixXd::Zero(4, 4)), 1, 3, true};
  const auto clad = fit_clad(problem);
  const auto lad = fit_lad(problem);
  CHECK(projection_error(clad.projection, lad.projection) <= 1e-6);
}

TEST_CASE("fit_il_lad with zero measurement error matches fit_lad") {
  const auto model = testutil::make_population_model(testutil::SigmaUKind::Zero);
  surrlad::Rng rng(41);
  const auto sample = testutil::sample_population(model, 700, rng);
  SurrogateProblem<double> problem{sample.W, sample.y,
                                   SymmetricMatrix<double>(MatrixXd::Zero(4, 4)), 1, 3, true};
  const auto il = fit_il_lad(problem);
  const auto lad = fit_lad(problem);
  CHECK(projection_error(il.projection, lad.projection) <= 1e-4);
}

TEST_CASE("cLAD and IL-LAD are close at large n") {
  // Single-index simulation draw at n = 5000, p = 10.
  surrlad::Rng rng = Rng::substream(990, 0);
  const auto ds = generate_dataset(SimModel::M1, CovariateLaw::Gaussian, 5000, 10, rng);
  SurrogateProblem<double> problem{ds.W, ds.y,
                                   SymmetricMatrix<double>(ds.sigma_u_diag.asDiagonal()), 1, 10,
                                   false};
  const auto clad = fit_clad(problem);
  const auto il = fit_il_lad(problem);
  CHECK(projection_error(clad.projection, il.projection) <= 0.05);
}

TEST_CASE("fit_il_sir flags a single-slice response as non-converged") {
  const auto model = testutil::make_population_model(testutil::SigmaUKind::Diagonal);
  surrlad::Rng rng(42);
  auto sample = testutil::sample_population(model, 300, rng);
  sample.y.setZero();  // one category
  SurrogateProblem<double> problem{sample.W, sample.y, SymmetricMatrix<double>(model.sigma_u), 1,
                                   1, true};
  const auto est = fit_il_sir(problem);
  CHECK_FALSE(est.converged);
}

TEST_CASE("fit_il_save flags identically-distributed slices as non-informative") {
  surrlad::Rng rng(43);
  const MatrixXd block = testutil::random_matrix(rng, 150, 4);
  MatrixXd w(450, 4);
  VectorXd y(450);
  for (int copy = 0; copy < 3; ++copy) {
    w.middleRows(150 * copy, 150) = block;
    y.segment(150 * copy, 150).setConstant(double(copy));
  }
  SurrogateProblem<double> problem{w, y, SymmetricMatrix<double>(MatrixXd::Zero(4, 4)), 1, 3, true};
  const auto est = fit_il_save(problem);
  CHECK_FALSE(est.converged);
  CHECK(est.objective_value <= 1e-10);
}

TEST_CASE("SIR misses a symmetric link that SAVE finds") {
  // Pure even link: slice means vanish, slice variances differ.
  surrlad::Rng rng(44);
  const Eigen::Index n = 20000, p = 4;
  const MatrixXd x = rng.normal_matrix(n, p);
  VectorXd beta(p);
  beta << 1, 1, 0, 0;
  beta.normalize();
  VectorXd y = (x * beta).array().square();
  SurrogateProblem<double> problem{x, y, SymmetricMatrix<double>(MatrixXd::Zero(p, p)), 1, 10,
                                   false};
  const MatrixXd truth = beta * beta.transpose();
  const auto sir = fit_il_sir(problem);
  const auto save = fit_il_save(problem);
  CHECK(projection_error(save.projection, truth) <= 0.1);
  CHECK(projection_error(sir.projection, truth) > 1.0);  // near-orthogonal pick
}

TEST_CASE("population equivalence of cLAD, IL-LAD, and SAVE") {
  const auto model = testutil::make_population_model(testutil::SigmaUKind::Diagonal);
  const Eigen::Index p = model.p();
  const MatrixXd truth = model.psi * model.psi.transpose();

  LikelihoodMatrices<double> clad_lm;
  clad_lm.marginal = model.l_true * model.sigma_w * model.l_true.transpose();
  for (int k = 0; k < model.num_slices(); ++k)
    clad_lm.slices.push_back(model.l_true * model.delta_wm[static_cast<size_t>(k)] *
                             model.l_true.transpose());
  clad_lm.weights = model.f;
  const MatrixXd p_clad = maximize_population(clad_lm, p, 1).projection();

  const MatrixXd sw_inv = model.sigma_w.llt().solve(MatrixXd::Identity(p, p));
  LikelihoodMatrices<double> il_lm;
  il_lm.marginal = model.sigma_x * sw_inv * model.sigma_x;
  for (int k = 0; k < model.num_slices(); ++k)
    il_lm.slices.push_back(model.sigma_x * sw_inv * model.delta_wm[static_cast<size_t>(k)] * sw_inv *
                           model.sigma_x);
  il_lm.weights = model.f;
  const MatrixXd p_il = maximize_population(il_lm, p, 1).projection();

  const MatrixXd p_save = population_save_projection(model);

  CHECK((p_clad - p_save).norm() <= 1e-6);
  CHECK((p_il - p_save).norm() <= 1e-6);
  CHECK((p_clad - p_il).norm() <= 1e-6);
  CHECK((p_save - truth).norm() <= 1e-8);
}

TEST_CASE("SurrogateProblem validation") {
  surrlad::Rng rng(45);
  const MatrixXd w = testutil::random_matrix(rng, 30, 4);
  VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = rng.normal();

  SurrogateProblem<double> bad_dim{w, y, SymmetricMatrix<double>(MatrixXd::Zero(4, 4)), 4, 3,
                                   false};
  CHECK_THROWS_AS(bad_dim.validate(), std::invalid_argument);

  MatrixXd indefinite = Eigen::Vector4d(1, 1, 1, -0.5).asDiagonal();
  SurrogateProblem<double> bad_su{w, y, SymmetricMatrix<double>(indefinite), 1, 3, false};
  CHECK_THROWS_AS(bad_su.validate(), std::invalid_argument);
}

TEST_SUITE_END();
