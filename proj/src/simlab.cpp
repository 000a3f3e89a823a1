#include "surrlad/simlab.hpp"

#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <mutex>
#include <thread>

#include "surrlad/evalmetrics.hpp"

namespace surrlad {

SimModel sim_model_from_string(const std::string& s) {
  if (s == "m1" || s == "i") return SimModel::M1;
  if (s == "m2" || s == "ii") return SimModel::M2;
  if (s == "m3" || s == "iii") return SimModel::M3;
  if (s == "m4" || s == "iv") return SimModel::M4;
  throw std::invalid_argument("unknown model '" + s + "' (expected m1..m4)");
}

CovariateLaw covariate_law_from_string(const std::string& s) {
  if (s == "gaussian") return CovariateLaw::Gaussian;
  if (s == "half_gaussian" || s == "half-gaussian") return CovariateLaw::HalfGaussian;
  if (s == "t3") return CovariateLaw::T3;
  throw std::invalid_argument("unknown covariate law '" + s + "'");
}

namespace {

struct ReplicateResult {
  std::vector<std::optional<double>> error;  // per estimator
  std::vector<std::optional<double>> f1;
};

ReplicateResult run_replicate(const Scenario& sc, const SparseOptions<double>& sparse_opts,
                              std::uint64_t replicate) {
  Rng rng = Rng::substream(sc.seed, replicate);
  const GeneratedDataset ds = generate_dataset(sc.model, sc.covariate_law, sc.n, sc.p, rng);
  const Eigen::MatrixXd p_true = true_projection(ds.B_true);
  const std::set<int> support = true_support(sc.model);

  SurrogateProblem<double> problem{ds.W, ds.y,
                                   SymmetricMatrix<double>(ds.sigma_u_diag.asDiagonal()),
                                   sc.d(), sc.num_slices, false};

  ReplicateResult out;
  out.error.resize(sc.estimators.size());
  out.f1.resize(sc.estimators.size());
  for (size_t e = 0; e < sc.estimators.size(); ++e) {
    try {
      Eigen::MatrixXd proj;
      switch (sc.estimators[e]) {
        case MethodTag::LAD: proj = fit_lad(problem).projection; break;
        case MethodTag::cLAD: proj = fit_clad(problem).projection; break;
        case MethodTag::IL_LAD: proj = fit_il_lad(problem).projection; break;
        case MethodTag::IL_SIR: proj = fit_il_sir(problem).projection; break;
        case MethodTag::IL_SAVE: proj = fit_il_save(problem).projection; break;
        case MethodTag::scLAD: {
          const SparsePath<double> path = fit_sclad(problem, sparse_opts);
          proj = path.selected().projection;
          out.f1[e] = selection_counts(proj, support, sparse_opts.diag_tol).f1;
          break;
        }
      }
      out.error[e] = projection_error(proj, p_true);
    } catch (const std::exception&) {
      // failure recorded by the absent value
    }
  }
  return out;
}

struct Moments1D {
  int count = 0;
  double mean = 0.0;
  double se = 0.0;
};

Moments1D reduce(const std::vector<std::optional<double>>& xs) {
  Moments1D m;
  double sum = 0.0;
  for (const auto& x : xs)
    if (x) {
      ++m.count;
      sum += *x;
    }
  if (m.count == 0) return m;
  m.mean = sum / m.count;
  if (m.count > 1) {
    double ss = 0.0;
    for (const auto& x : xs)
      if (x) ss += (*x - m.mean) * (*x - m.mean);
    m.se = std::sqrt(ss / (m.count - 1)) / std::sqrt(double(m.count));
  }
  return m;
}

}  // namespace

ScenarioSummary run_scenario(const Scenario& scenario, const SparseOptions<double>& sparse_opts,
                             int threads) {
  scenario.validate();
  const int reps = scenario.replicates;
  std::vector<ReplicateResult> results(static_cast<size_t>(reps));

  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, reps);

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= reps) return;
      try {
        results[static_cast<size_t>(r)] =
            run_replicate(scenario, sparse_opts, static_cast<std::uint64_t>(r));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ScenarioSummary summary;
  summary.scenario = scenario;
  for (size_t e = 0; e < scenario.estimators.size(); ++e) {
    std::vector<std::optional<double>> errs, f1s;
    errs.reserve(results.size());
    f1s.reserve(results.size());
    for (const auto& r : results) {
      errs.push_back(r.error[e]);
      f1s.push_back(r.f1[e]);
    }
    const Moments1D em = reduce(errs);
    const Moments1D fm = reduce(f1s);
    EstimatorSummary es;
    es.method = scenario.estimators[e];
    es.completed = em.count;
    es.failures = reps - em.count;
    es.mean_error = em.mean;
    es.se_error = em.se;
    es.has_f1 = fm.count > 0;
    es.mean_f1 = fm.mean;
    es.se_f1 = fm.se;
    summary.estimators.push_back(es);
  }
  return summary;
}

std::string summary_to_csv(const ScenarioSummary& summary) {
  std::ostringstream os;
  os << "model,covariates,n,p,d,slices,replicates,seed,estimator,completed,failures,"
        "mean_error,se_error,mean_f1,se_f1\n";
  os << std::setprecision(10);
  const Scenario& sc = summary.scenario;
  for (const auto& e : summary.estimators) {
    os << to_string(sc.model) << ',' << to_string(sc.covariate_law) << ',' << sc.n << ',' << sc.p
       << ',' << sc.d() << ',' << sc.num_slices << ',' << sc.replicates << ',' << sc.seed << ','
       << to_string(e.method) << ',' << e.completed << ',' << e.failures << ',' << e.mean_error
       << ',' << e.se_error << ',';
    if (e.has_f1)
      os << e.mean_f1 << ',' << e.se_f1;
    else
      os << ',';
    os << '\n';
  }
  return os.str();
}

std::string summary_to_text(const ScenarioSummary& summary) {
  std::ostringstream os;
  const Scenario& sc = summary.scenario;
  os << "scenario: model=" << to_string(sc.model) << " covariates=" << to_string(sc.covariate_law)
     << " n=" << sc.n << " p=" << sc.p << " d=" << sc.d() << " slices=" << sc.num_slices
     << " replicates=" << sc.replicates << " seed=" << sc.seed << "\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& e : summary.estimators) {
    os << "  " << std::left << std::setw(8) << to_string(e.method) << " mean error "
       << e.mean_error << " (se " << e.se_error << ")";
    if (e.has_f1) os << "  F1 " << e.mean_f1 << " (se " << e.se_f1 << ")";
    if (e.failures > 0) os << "  [" << e.failures << " failed]";
    os << "\n";
  }
  return os.str();
}

}  // namespace surrlad
