// Command-line interface: fit estimators on CSV data (optionally estimating
// the measurement-error covariance from replicate columns) and drive
// simulation scenarios from config files.
//
// Exit codes: 0 success, 2 bad input, 3 nonconvergence, 4 numerical degeneracy.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "surrlad/dataio.hpp"
#include "surrlad/evalmetrics.hpp"

namespace fs = std::filesystem;
using namespace surrlad;

namespace {

constexpr int kExitBadInput = 2;
constexpr int kExitNonconvergence = 3;
constexpr int kExitDegenerate = 4;

struct FitArgs {
  std::string data_path;
  std::string method = "clad";
  int dim = 1;
  int slices = 10;
  std::string sigma_u = "zero";  // path | "replicates" | "zero"
  std::vector<std::string> error_free;
  bool categorical = false;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = ".";
  double diag_tol = 1e-4;
  double lambda_max = 1.0;
  int grid_size = 40;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
  out << text;
}

std::set<int> resolve_error_free(const std::vector<std::string>& spec,
                                 const std::vector<std::string>& names) {
  std::set<int> out;
  for (const auto& item : spec) {
    char* end = nullptr;
    const long idx = std::strtol(item.c_str(), &end, 10);
    if (end != item.c_str() && *end == '\0') {
      if (idx < 0 || idx >= static_cast<long>(names.size()))
        throw std::invalid_argument("--error-free index " + item + " out of range");
      out.insert(static_cast<int>(idx));
      continue;
    }
    const auto it = std::find(names.begin(), names.end(), item);
    if (it == names.end())
      throw std::invalid_argument("--error-free column '" + item + "' not found");
    out.insert(static_cast<int>(it - names.begin()));
  }
  return out;
}

int run_fit(const FitArgs& args) {
  const MethodTag method = method_from_string(args.method);
  const DataTable table = read_csv(args.data_path);
  if (table.dropped_rows > 0)
    std::cerr << "note: dropped " << table.dropped_rows << " rows with missing values\n";

  Eigen::VectorXd y;
  Eigen::MatrixXd w;
  std::vector<std::string> covariate_names;
  SymmetricMatrix<double> sigma_u(Eigen::MatrixXd::Zero(1, 1));

  if (args.sigma_u == "replicates") {
    ReplicateBlocks blocks = split_replicates(table);
    for (int j : resolve_error_free(args.error_free, blocks.names)) blocks.error_free.insert(j);
    if (blocks.W1.rows() < blocks.W1.cols())
      std::cerr << "warning: fewer observations than covariates; the replicate-based "
                   "measurement-error estimate may be rank-deficient\n";
    sigma_u = estimate_sigma_u(blocks);
    y = blocks.y;
    w = (blocks.W1 + blocks.W2) / 2.0;
    covariate_names = blocks.names;
  } else {
    y = table.values.col(0);
    w = table.values.rightCols(table.cols() - 1);
    covariate_names.assign(table.names.begin() + 1, table.names.end());
    if (args.sigma_u == "zero") {
      sigma_u = SymmetricMatrix<double>(Eigen::MatrixXd::Zero(w.cols(), w.cols()));
    } else {
      const DataTable st = read_csv(args.sigma_u);
      if (st.values.rows() != w.cols() || st.values.cols() != w.cols())
        throw std::invalid_argument("--sigma-u matrix must be p-by-p for p = " +
                                    std::to_string(w.cols()));
      Eigen::MatrixXd sm = st.values;
      for (int j : resolve_error_free(args.error_free, covariate_names)) {
        sm.row(j).setZero();
        sm.col(j).setZero();
      }
      sigma_u = SymmetricMatrix<double>(sm);
    }
  }

  SurrogateProblem<double> problem{w, y, sigma_u, args.dim, args.slices, args.categorical};
  problem.validate();

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);

  std::vector<std::pair<std::string, std::string>> echo = {
      {"input", args.data_path},
      {"method", args.method},
      {"dim", std::to_string(args.dim)},
      {"slices", std::to_string(args.slices)},
      {"sigma_u", args.sigma_u},
      {"categorical", args.categorical ? "true" : "false"},
      {"seed", std::to_string(args.seed)},
      {"diag_tol", std::to_string(args.diag_tol)},
      {"lambda_max", std::to_string(args.lambda_max)},
      {"grid_size", std::to_string(args.grid_size)},
  };

  SubspaceEstimate<double> estimate;
  Eigen::MatrixXd l_hat = Eigen::MatrixXd::Identity(w.cols(), w.cols());
  std::unique_ptr<SparsePath<double>> path;

  switch (method) {
    case MethodTag::LAD:
      estimate = fit_lad(problem);
      break;
    case MethodTag::cLAD: {
      CladFit<double> fit = fit_clad_detailed(problem);
      estimate = fit.estimate;
      l_hat = fit.delta.L_hat;
      break;
    }
    case MethodTag::IL_LAD:
      estimate = fit_il_lad(problem);
      break;
    case MethodTag::IL_SIR:
      estimate = fit_il_sir(problem);
      break;
    case MethodTag::IL_SAVE:
      estimate = fit_il_save(problem);
      break;
    case MethodTag::scLAD: {
      SparseOptions<double> sp;
      sp.lambda_max = args.lambda_max;
      sp.grid_size = args.grid_size;
      sp.diag_tol = args.diag_tol;
      CladFit<double> fit = fit_clad_detailed(problem);
      path = std::make_unique<SparsePath<double>>(fit_sclad(problem, fit, sp));
      estimate = path->selected();
      l_hat = fit.delta.L_hat;
      break;
    }
  }

  write_text(out_dir / "estimate.json",
             estimate_to_json(estimate, echo, w.rows(), table.dropped_rows, path.get()));

  const Eigen::MatrixXd t = sufficient_predictors(method, w, estimate.basis.basis, l_hat, sigma_u);
  Eigen::MatrixXd pred(t.rows(), t.cols() + 1);
  pred.col(0) = y;
  pred.rightCols(t.cols()) = t;
  std::vector<std::string> pred_names = {"y"};
  for (Eigen::Index j = 0; j < t.cols(); ++j) pred_names.push_back("T" + std::to_string(j + 1));
  write_csv(out_dir / "predictors.csv", pred_names, pred);

  if (path) {
    Eigen::MatrixXd path_table(path->lambdas.size(), 4);
    for (Eigen::Index k = 0; k < path->lambdas.size(); ++k) {
      const auto& est = path->estimates[static_cast<size_t>(k)];
      Eigen::Index s = 0;
      for (Eigen::Index j = 0; j < est.projection.rows(); ++j)
        if (est.projection(j, j) > args.diag_tol) ++s;
      path_table(k, 0) = path->lambdas[k];
      path_table(k, 1) = path->pic_values[k];
      path_table(k, 2) = est.converged ? 1.0 : 0.0;
      path_table(k, 3) = double(s);
    }
    write_csv(out_dir / "path.csv", {"lambda", "pic", "converged", "support_size"}, path_table);
  }

  if (!estimate.converged) {
    std::cerr << "fit did not converge (grad norm " << estimate.grad_norm << " after "
              << estimate.iterations << " iterations); artifacts written to " << out_dir << "\n";
    return kExitNonconvergence;
  }
  std::cout << "wrote " << (out_dir / "estimate.json").string() << "\n";
  return 0;
}

struct SimArgs {
  std::string config_path;
  std::string out_dir = ".";
  int threads = 0;
  std::int64_t seed_override = -1;
};

int run_simulate(const SimArgs& args) {
  ScenarioConfig config = read_scenario_config(args.config_path);
  if (args.seed_override >= 0)
    config.scenario.seed = static_cast<std::uint64_t>(args.seed_override);

  const ScenarioSummary summary = run_scenario(config.scenario, config.sparse, args.threads);

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);
  write_text(out_dir / "summary.csv", summary_to_csv(summary));
  write_text(out_dir / "provenance.json",
             provenance_to_json(config, {{"config_file", args.config_path}}));
  std::cout << summary_to_text(summary);
  std::cout << "wrote " << (out_dir / "summary.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-based sufficient dimension reduction for covariates "
               "measured with additive Gaussian error"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit an estimator on a CSV dataset");
  fit->add_option("data", fit_args.data_path,
                  "CSV file; first column is the response, remaining columns covariates "
                  "('name_r1'/'name_r2' pairs when --sigma-u replicates)")
      ->required();
  fit->add_option("--method", fit_args.method, "lad|clad|il-lad|il-sir|il-save|sclad")
      ->check(CLI::IsMember({"lad", "clad", "il-lad", "il-sir", "il-save", "sclad"}));
  fit->add_option("--dim", fit_args.dim, "target subspace dimension d");
  fit->add_option("--slices", fit_args.slices, "number of response slices M");
  fit->add_option("--sigma-u", fit_args.sigma_u,
                  "measurement-error covariance: CSV path, 'replicates', or 'zero'");
  fit->add_option("--error-free", fit_args.error_free,
                  "covariates measured without error (names or 0-based indices)")
      ->delimiter(',');
  fit->add_flag("--categorical", fit_args.categorical, "treat the response as categorical");
  fit->add_option("--seed", fit_args.seed, "seed echoed into artifacts");
  fit->add_option("--threads", fit_args.threads, "accepted for symmetry; fit is single-threaded");
  fit->add_option("--out", fit_args.out_dir, "output directory");
  fit->add_option("--diag-tol", fit_args.diag_tol, "support threshold on projection diagonals");
  fit->add_option("--lambda-max", fit_args.lambda_max, "largest penalty on the scLAD grid");
  fit->add_option("--grid-size", fit_args.grid_size, "number of scLAD grid points");

  SimArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "Run a Monte-Carlo scenario from a config file");
  sim->add_option("config", sim_args.config_path, "scenario config (key = value lines)")
      ->required();
  sim->add_option("--out", sim_args.out_dir, "output directory");
  sim->add_option("--threads", sim_args.threads, "worker threads (default: hardware parallelism)");
  sim->add_option("--seed", sim_args.seed_override, "override the config seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return run_fit(fit_args);
    if (sim->parsed()) return run_simulate(sim_args);
  } catch (const DegeneracyError& e) {
    std::cerr << "numerical degeneracy: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
