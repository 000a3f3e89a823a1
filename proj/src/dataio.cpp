#include "surrlad/dataio.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace surrlad {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool is_missing(const std::string& field) {
  const std::string t = trim(field);
  if (t.empty()) return true;
  std::string lower(t);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower == "na" || lower == "nan" || lower == "null";
}

/// Splits one logical CSV record starting at the stream position; handles
/// quoted fields spanning lines. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false, any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field.push_back(ch);
    }
  }
  if (!any) return false;
  fields.push_back(field);
  return true;
}

double parse_number(const std::string& field, const std::string& origin, int line, int col) {
  const std::string t = trim(field);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0') {
    std::ostringstream os;
    os << origin << ":" << line << ": field " << col + 1 << " ('" << t << "') is not numeric";
    throw std::invalid_argument(os.str());
  }
  return v;
}

}  // namespace

DataTable parse_csv(std::istream& in, const std::string& origin) {
  DataTable table;
  std::vector<std::string> fields;
  if (!read_record(in, fields) || fields.empty())
    throw std::invalid_argument(origin + ": empty file (expected a header row)");
  for (auto& f : fields) table.names.push_back(trim(f));
  const size_t ncol = table.names.size();

  std::vector<std::vector<double>> rows;
  int line = 1;
  while (read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    if (fields.size() != ncol) {
      std::ostringstream os;
      os << origin << ":" << line << ": expected " << ncol << " fields, found " << fields.size();
      throw std::invalid_argument(os.str());
    }
    bool missing = false;
    for (const auto& f : fields)
      if (is_missing(f)) {
        missing = true;
        break;
      }
    if (missing) {
      ++table.dropped_rows;
      continue;
    }
    std::vector<double> row(ncol);
    for (size_t c = 0; c < ncol; ++c)
      row[c] = parse_number(fields[c], origin, line, static_cast<int>(c));
    rows.push_back(std::move(row));
  }

  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ncol));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < ncol; ++c)
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return table;
}

DataTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  return parse_csv(in, path.filename().string());
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
               const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
  for (size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << values(i, j);
    out << '\n';
  }
}

namespace {

bool strip_suffix(const std::string& name, const std::string& suffix, std::string& base) {
  if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
    return false;
  base = name.substr(0, name.size() - suffix.size());
  return true;
}

}  // namespace

ReplicateBlocks split_replicates(const DataTable& table) {
  if (table.cols() < 2)
    throw std::invalid_argument("split_replicates: table needs a response and covariates");
  ReplicateBlocks out;
  out.y = table.values.col(0);

  struct Entry {
    int r1 = -1, r2 = -1, single = -1;
  };
  std::vector<std::string> order;
  std::map<std::string, Entry> entries;
  for (Eigen::Index c = 1; c < table.cols(); ++c) {
    const std::string& name = table.names[static_cast<size_t>(c)];
    std::string base;
    Entry* e = nullptr;
    if (strip_suffix(name, "_r1", base)) {
      e = &entries[base];
      if (e->r1 >= 0) throw std::invalid_argument("split_replicates: duplicate column " + name);
      e->r1 = static_cast<int>(c);
    } else if (strip_suffix(name, "_r2", base)) {
      e = &entries[base];
      if (e->r2 >= 0) throw std::invalid_argument("split_replicates: duplicate column " + name);
      e->r2 = static_cast<int>(c);
    } else {
      base = name;
      e = &entries[base];
      if (e->single >= 0) throw std::invalid_argument("split_replicates: duplicate column " + name);
      e->single = static_cast<int>(c);
    }
    if (std::find(order.begin(), order.end(), base) == order.end()) order.push_back(base);
  }

  const Eigen::Index p = static_cast<Eigen::Index>(order.size());
  out.W1.resize(table.n(), p);
  out.W2.resize(table.n(), p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Entry& e = entries[order[static_cast<size_t>(j)]];
    if (e.single >= 0) {
      if (e.r1 >= 0 || e.r2 >= 0)
        throw std::invalid_argument("split_replicates: column '" + order[static_cast<size_t>(j)] +
                                    "' mixes suffixed and unsuffixed forms");
      out.W1.col(j) = table.values.col(e.single);
      out.W2.col(j) = table.values.col(e.single);
      out.error_free.insert(static_cast<int>(j));
    } else {
      if (e.r1 < 0 || e.r2 < 0)
        throw std::invalid_argument("split_replicates: covariate '" + order[static_cast<size_t>(j)] +
                                    "' is missing one of its _r1/_r2 replicates");
      out.W1.col(j) = table.values.col(e.r1);
      out.W2.col(j) = table.values.col(e.r2);
    }
    out.names.push_back(order[static_cast<size_t>(j)]);
  }
  return out;
}

SymmetricMatrix<double> estimate_sigma_u(const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2,
                                         const std::set<int>& error_free) {
  if (w1.rows() != w2.rows() || w1.cols() != w2.cols())
    throw std::invalid_argument("estimate_sigma_u: replicate blocks have mismatched shapes");
  const Eigen::Index n = w1.rows(), p = w1.cols();
  if (n < 1) throw std::invalid_argument("estimate_sigma_u: no observations");
  const Eigen::MatrixXd diff = w1 - w2;
  // Sigma*_u/2 for the averaged surrogate: (4n)^{-1} sum d_i d_i'.
  Eigen::MatrixXd s = (diff.transpose() * diff) / (4.0 * double(n));
  for (int j : error_free) {
    if (j < 0 || j >= p) throw std::invalid_argument("estimate_sigma_u: error-free index out of range");
    s.row(j).setZero();
    s.col(j).setZero();
  }
  return SymmetricMatrix<double>(std::move(s));
}

SymmetricMatrix<double> estimate_sigma_u(const ReplicateBlocks& blocks) {
  return estimate_sigma_u(blocks.W1, blocks.W2, blocks.error_free);
}

Eigen::MatrixXd sufficient_predictors(MethodTag method, const Eigen::MatrixXd& w,
                                      const Eigen::MatrixXd& basis, const Eigen::MatrixXd& l_hat,
                                      const SymmetricMatrix<double>& sigma_u) {
  switch (method) {
    case MethodTag::cLAD:
    case MethodTag::scLAD:
      return (w * l_hat.transpose()) * basis;
    case MethodTag::IL_LAD:
    case MethodTag::IL_SIR:
    case MethodTag::IL_SAVE:
      return adjusted_surrogates(w, sigma_u) * basis;
    case MethodTag::LAD:
      return w * basis;
  }
  throw std::invalid_argument("sufficient_predictors: unknown method");
}

namespace {

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

long parse_long(const std::string& v, const std::string& origin, int line) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    std::ostringstream os;
    os << origin << ":" << line << ": '" << v << "' is not an integer";
    throw std::invalid_argument(os.str());
  }
  return x;
}

double parse_double(const std::string& v, const std::string& origin, int line) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    std::ostringstream os;
    os << origin << ":" << line << ": '" << v << "' is not a number";
    throw std::invalid_argument(os.str());
  }
  return x;
}

}  // namespace

ScenarioConfig parse_scenario_config(std::istream& in, const std::string& origin) {
  ScenarioConfig config;
  config.scenario.estimators = {MethodTag::cLAD};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string stripped = trim(raw);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << origin << ":" << line << ": expected 'key = value'";
      throw std::invalid_argument(os.str());
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = unquote(trim(stripped.substr(eq + 1)));
    try {
      if (key == "model") {
        config.scenario.model = sim_model_from_string(value);
      } else if (key == "covariates") {
        config.scenario.covariate_law = covariate_law_from_string(value);
      } else if (key == "n") {
        config.scenario.n = parse_long(value, origin, line);
      } else if (key == "p") {
        config.scenario.p = parse_long(value, origin, line);
      } else if (key == "slices") {
        config.scenario.num_slices = static_cast<int>(parse_long(value, origin, line));
      } else if (key == "replicates") {
        config.scenario.replicates = static_cast<int>(parse_long(value, origin, line));
      } else if (key == "seed") {
        config.scenario.seed = static_cast<std::uint64_t>(parse_long(value, origin, line));
      } else if (key == "estimators") {
        config.scenario.estimators.clear();
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          const std::string t = trim(tok);
          if (!t.empty()) config.scenario.estimators.push_back(method_from_string(t));
        }
      } else if (key == "lambda_max") {
        config.sparse.lambda_max = parse_double(value, origin, line);
      } else if (key == "grid_size") {
        config.sparse.grid_size = static_cast<int>(parse_long(value, origin, line));
      } else if (key == "diag_tol") {
        config.sparse.diag_tol = parse_double(value, origin, line);
      } else {
        std::ostringstream os;
        os << origin << ":" << line << ": unknown key '" << key << "'";
        throw std::invalid_argument(os.str());
      }
    } catch (const std::invalid_argument&) {
      throw;
    }
  }
  config.scenario.validate();
  return config;
}

ScenarioConfig read_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path.string() + "'");
  return parse_scenario_config(in, path.filename().string());
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string estimate_to_json(const SubspaceEstimate<double>& estimate,
                             const std::vector<std::pair<std::string, std::string>>& config_echo,
                             Eigen::Index n, int dropped_rows, const SparsePath<double>* path) {
  nlohmann::json j;
  j["version"] = kVersion;
  j["method"] = to_string(estimate.method);
  j["n"] = n;
  j["p"] = estimate.basis.p();
  j["d"] = estimate.basis.d();
  j["dropped_rows"] = dropped_rows;
  j["converged"] = estimate.converged;
  j["iterations"] = estimate.iterations;
  j["objective_value"] = estimate.objective_value;
  j["grad_norm"] = estimate.grad_norm;
  j["basis"] = matrix_to_json(estimate.basis.basis);
  j["projection"] = matrix_to_json(estimate.projection);
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : config_echo) cfg[k] = v;
  j["config"] = std::move(cfg);
  if (path) {
    nlohmann::json sp;
    sp["lambdas"] = std::vector<double>(path->lambdas.data(), path->lambdas.data() + path->lambdas.size());
    std::vector<double> pics(path->pic_values.data(), path->pic_values.data() + path->pic_values.size());
    for (auto& v : pics)
      if (!std::isfinite(v)) v = -1.0;  // JSON has no NaN; failed grid points marked -1
    sp["pic"] = pics;
    sp["selected_index"] = path->selected_index;
    sp["support"] = std::vector<int>(path->support.begin(), path->support.end());
    nlohmann::json conv = nlohmann::json::array();
    for (const auto& est : path->estimates) conv.push_back(est.converged);
    sp["converged"] = std::move(conv);
    j["sclad"] = std::move(sp);
  }
  return j.dump(2) + "\n";
}

std::string provenance_to_json(const ScenarioConfig& config,
                               const std::vector<std::pair<std::string, std::string>>& extra) {
  nlohmann::json j;
  j["version"] = kVersion;
  const Scenario& sc = config.scenario;
  j["scenario"] = {{"model", to_string(sc.model)},
                   {"covariates", to_string(sc.covariate_law)},
                   {"n", sc.n},
                   {"p", sc.p},
                   {"d", sc.d()},
                   {"slices", sc.num_slices},
                   {"replicates", sc.replicates},
                   {"seed", sc.seed}};
  std::vector<std::string> est;
  for (auto m : sc.estimators) est.push_back(to_string(m));
  j["scenario"]["estimators"] = est;
  j["sparse"] = {{"lambda_max", config.sparse.lambda_max},
                 {"grid_size", config.sparse.grid_size},
                 {"diag_tol", config.sparse.diag_tol}};
  for (const auto& [k, v] : extra) j[k] = v;
  return j.dump(2) + "\n";
}

}  // namespace surrlad
