#pragma once

// CSV ingestion, replicate-based measurement-error estimation, scenario
// config files, and JSON artifact serialization backing the CLI.

#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "surrlad/estimators.hpp"
#include "surrlad/simlab.hpp"
#include "surrlad/sparse.hpp"

namespace surrlad {

/// A numeric table read from CSV. Rows containing missing values (empty
/// fields, NA, NaN) are dropped and counted.
struct DataTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
  int dropped_rows = 0;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

/// RFC-4180 CSV with a header row; quoted fields may contain commas, escaped
/// quotes and newlines. Non-numeric payloads raise invalid_argument naming
/// the offending line and field.
DataTable read_csv(const std::filesystem::path& path);
DataTable parse_csv(std::istream& in, const std::string& origin);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
               const Eigen::MatrixXd& values);

/// Two replicate measurement blocks split out of a table whose first column
/// is the response. Covariates appear either as suffixed pairs
/// (name_r1, name_r2) or as single unsuffixed columns, which are treated as
/// error-free and copied into both blocks.
struct ReplicateBlocks {
  Eigen::VectorXd y;
  Eigen::MatrixXd W1;
  Eigen::MatrixXd W2;
  std::vector<std::string> names;   // base covariate names
  std::set<int> error_free;         // indices with measurement error forced to zero
};

ReplicateBlocks split_replicates(const DataTable& table);

/// Sigma_u-hat for the averaged surrogate W = (W1 + W2)/2:
///   Sigma*_u = (2n)^{-1} sum (W_i1 - W_i2)(W_i1 - W_i2)',  Sigma_u = Sigma*_u / 2,
/// with error-free rows and columns zeroed.
SymmetricMatrix<double> estimate_sigma_u(const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2,
                                         const std::set<int>& error_free = {});
SymmetricMatrix<double> estimate_sigma_u(const ReplicateBlocks& blocks);

/// Sufficient predictors T_i for a fitted basis: cLAD-family methods use the
/// adjusted surrogate V_i = Delta (Delta + Sigma_u)^{-1} W_i, invariance-law
/// methods use X*_i = (Sigma_w - Sigma_u) Sigma_w^{-1} W_i, the naive LAD
/// uses W_i directly.
Eigen::MatrixXd sufficient_predictors(MethodTag method, const Eigen::MatrixXd& w,
                                      const Eigen::MatrixXd& basis, const Eigen::MatrixXd& l_hat,
                                      const SymmetricMatrix<double>& sigma_u);

/// Scenario config: `key = value` lines with '#' comments. Unknown keys and
/// malformed values raise invalid_argument with the line number.
struct ScenarioConfig {
  Scenario scenario;
  SparseOptions<double> sparse;
};

ScenarioConfig parse_scenario_config(std::istream& in, const std::string& origin);
ScenarioConfig read_scenario_config(const std::filesystem::path& path);

/// JSON serialization of a fitted estimate (plus the resolved run config),
/// and of the scenario provenance record.
struct FitArtifacts {
  std::string estimate_json;
  std::string predictors_csv_name = "predictors.csv";
};

std::string estimate_to_json(const SubspaceEstimate<double>& estimate,
                             const std::vector<std::pair<std::string, std::string>>& config_echo,
                             Eigen::Index n, int dropped_rows,
                             const SparsePath<double>* path = nullptr);

std::string provenance_to_json(const ScenarioConfig& config,
                               const std::vector<std::pair<std::string, std::string>>& extra);

}  // namespace surrlad
