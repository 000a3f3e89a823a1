#include <doctest.h>

#include "surrlad/dataio.hpp"

#include <sstream>

#include "surrlad/evalmetrics.hpp"

#include "helpers.hpp"

using namespace surrlad;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_SUITE_BEGIN("dataio");

TEST_CASE("csv parsing handles quoting and missing values") {
  std::istringstream in(
      "y,\"a,b\",c\r\n"
      "1.5,2,3\r\n"
      "2.5,,4\n"          // missing -> dropped
      "\"3.5\",5,6\n"
      "4.5,NA,7\n"        // missing -> dropped
      "5.5,\"8\",9\n");
  const DataTable t = parse_csv(in, "test.csv");
  REQUIRE(t.names.size() == 3);
  CHECK(t.names[1] == "a,b");
  CHECK(t.n() == 3);
  CHECK(t.dropped_rows == 2);
  CHECK(t.values(0, 0) == 1.5);
  CHECK(t.values(1, 1) == 5.0);
  CHECK(t.values(2, 2) == 9.0);
}

TEST_CASE("csv parsing reports the offending line and field") {
  std::istringstream in("y,x\n1,2\n3,oops\n");
  CHECK_THROWS_WITH_AS(parse_csv(in, "bad.csv"), doctest::Contains("bad.csv:3"),
                       std::invalid_argument);
}

TEST_CASE("csv write/read round trip") {
  surrlad::Rng rng(81);
  const MatrixXd m = rng.normal_matrix(7, 3);
  const auto path = std::filesystem::temp_directory_path() / "surrlad_roundtrip.csv";
  write_csv(path, {"y", "w1", "w2"}, m);
  const DataTable t = read_csv(path);
  CHECK(t.names == std::vector<std::string>{"y", "w1", "w2"});
  CHECK((t.values - m).cwiseAbs().maxCoeff() <= 1e-15);
  std::filesystem::remove(path);
}

TEST_CASE("replicate splitting pairs suffixed columns and flags unsuffixed ones") {
  std::istringstream in(
      "y,age,sugar_r1,sugar_r2,fat_r1,fat_r2\n"
      "1,50,2,4,1,3\n"
      "2,60,6,2,5,1\n");
  const DataTable t = parse_csv(in, "rep.csv");
  const ReplicateBlocks blocks = split_replicates(t);
  CHECK(blocks.names == std::vector<std::string>{"age", "sugar", "fat"});
  CHECK(blocks.error_free == std::set<int>{0});
  CHECK(blocks.W1(0, 1) == 2.0);
  CHECK(blocks.W2(0, 1) == 4.0);
  CHECK(blocks.W1(0, 0) == blocks.W2(0, 0));

  std::istringstream broken("y,a_r1\n1,2\n");
  const DataTable tb = parse_csv(broken, "broken.csv");
  CHECK_THROWS_AS(split_replicates(tb), std::invalid_argument);
}

TEST_CASE("estimate_sigma_u: identical replicates give zero") {
  surrlad::Rng rng(82);
  const MatrixXd w = rng.normal_matrix(50, 4);
  CHECK(estimate_sigma_u(w, w).m().norm() == 0.0);
  CHECK_THROWS_AS(estimate_sigma_u(w, rng.normal_matrix(50, 3)), std::invalid_argument);
}

TEST_CASE("estimate_sigma_u recovers the generating covariance") {
  surrlad::Rng rng(83);
  const Eigen::Index n = 10000, p = 5;
  VectorXd star(p);  // Sigma*_u diagonal (per-interview error variances)
  for (Eigen::Index j = 0; j < p; ++j) star[j] = rng.uniform(0.3, 0.8);
  const MatrixXd x = rng.normal_matrix(n, p);
  MatrixXd w1 = x, w2 = x;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) {
      w1(i, j) += std::sqrt(star[j]) * rng.normal();
      w2(i, j) += std::sqrt(star[j]) * rng.normal();
    }
  const auto est = estimate_sigma_u(w1, w2, {0});
  CHECK(est.m().row(0).norm() == 0.0);
  CHECK(est.m().col(0).norm() == 0.0);
  for (Eigen::Index j = 1; j < p; ++j)
    CHECK(est.m()(j, j) == doctest::Approx(star[j] / 2.0).epsilon(0.05));
}

TEST_CASE("sufficient predictors correlate with the true index") {
  surrlad::Rng rng = Rng::substream(808, 0);
  const auto ds = generate_dataset(SimModel::M1, CovariateLaw::Gaussian, 2000, 10, rng);
  SurrogateProblem<double> problem{ds.W, ds.y,
                                   SymmetricMatrix<double>(ds.sigma_u_diag.asDiagonal()), 1, 10,
                                   false};
  const CladFit<double> fit = fit_clad_detailed(problem);
  const MatrixXd t = sufficient_predictors(MethodTag::cLAD, ds.W, fit.estimate.basis.basis,
                                           fit.delta.L_hat, problem.sigma_u);
  REQUIRE(t.cols() == 1);
  const VectorXd index = ds.X * ds.B_true.col(0);
  const VectorXd tc = t.col(0).array() - t.col(0).mean();
  const VectorXd ic = index.array() - index.mean();
  const double corr = tc.dot(ic) / (tc.norm() * ic.norm());
  CHECK(std::abs(corr) >= 0.9);
}

TEST_CASE("scenario config parsing") {
  std::istringstream in(
      "# comment\n"
      "model = m3\n"
      "covariates = t3\n"
      "n = 500\n"
      "p = 12\n"
      "slices = 6\n"
      "replicates = 7\n"
      "seed = 99\n"
      "estimators = clad, il-sir, sclad\n"
      "lambda_max = 0.5\n"
      "grid_size = 10\n"
      "diag_tol = 2e-4\n");
  const ScenarioConfig c = parse_scenario_config(in, "cfg");
  CHECK(c.scenario.model == SimModel::M3);
  CHECK(c.scenario.covariate_law == CovariateLaw::T3);
  CHECK(c.scenario.n == 500);
  CHECK(c.scenario.d() == 2);
  CHECK(c.scenario.estimators.size() == 3);
  CHECK(c.sparse.lambda_max == 0.5);
  CHECK(c.sparse.grid_size == 10);
  CHECK(c.sparse.diag_tol == 2e-4);

  std::istringstream bad("model = m1\nwidgets = 3\n");
  CHECK_THROWS_WITH_AS(parse_scenario_config(bad, "cfg"), doctest::Contains("cfg:2"),
                       std::invalid_argument);

  std::istringstream badval("n = lots\n");
  CHECK_THROWS_WITH_AS(parse_scenario_config(badval, "cfg"), doctest::Contains("cfg:1"),
                       std::invalid_argument);
}

TEST_CASE("estimate artifact serialization") {
  surrlad::Rng rng(84);
  SubspaceEstimate<double> est;
  est.basis = GrassmannPoint<double>::from_basis(testutil::random_semi_orthogonal(rng, 4, 1));
  est.projection = est.basis.projection();
  est.objective_value = 1.25;
  est.converged = true;
  est.iterations = 12;
  est.method = MethodTag::cLAD;
  const std::string json = estimate_to_json(est, {{"input", "x.csv"}}, 100, 2);
  CHECK(json.find("\"method\": \"clad\"") != std::string::npos);
  CHECK(json.find("\"converged\": true") != std::string::npos);
  CHECK(json.find("\"dropped_rows\": 2") != std::string::npos);
  CHECK(json.find("\"basis\"") != std::string::npos);
  CHECK(json.find("\"projection\"") != std::string::npos);
  CHECK(json.find("\"input\": \"x.csv\"") != std::string::npos);
}

TEST_SUITE_END();
