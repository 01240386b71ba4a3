#include "tsen/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "tsen/errors.hpp"
#include "tsen/rng.hpp"

namespace tsen {

std::uint64_t repetition_seed(std::uint64_t master, std::size_t rep) { return derive_seed(master, {rep}); }

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

struct Outcome {
  MethodScores scores;
  std::string error;
  bool ok = false;
  bool wrong_shape = false;
};

Outcome run_job(const ExperimentSpec& spec, std::size_t rep, std::size_t method) {
  Outcome out;
  try {
    out.scores = spec.job(rep, method, repetition_seed(spec.master_seed, rep));
    if (out.scores.rmse.size() != spec.rows.size() || out.scores.mae.size() != spec.rows.size()) {
      out.error = "job returned " + std::to_string(out.scores.rmse.size()) + " rows, expected " +
                  std::to_string(spec.rows.size());
      out.wrong_shape = true;
    } else {
      out.ok = true;
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  } catch (...) {
    out.error = "unknown failure";
  }
  if (!out.ok) out.scores = {};
  return out;
}

ScoreTable empty_table(const ExperimentSpec& spec) {
  ScoreTable t;
  t.rows = spec.rows;
  t.cols = spec.methods;
  t.values.assign(spec.rows.size(), std::vector<double>(spec.methods.size()));
  return t;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

ExperimentResult repeated_experiment(const ExperimentSpec& spec, Execution execution) {
  if (spec.reps < 1) throw ContractError("repeated_experiment: reps must be at least 1");
  if (spec.methods.empty()) throw ContractError("repeated_experiment: no methods");
  if (!spec.job) throw ContractError("repeated_experiment: no job");

  const std::size_t n_methods = spec.methods.size();
  const std::size_t n_jobs = spec.reps * n_methods;
  std::vector<Outcome> outcomes(n_jobs);
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < n_jobs; ++i) outcomes[i] = run_job(spec, i / n_methods, i % n_methods);
  } else {
    for (std::size_t i = 0; i < n_jobs; ++i) outcomes[i] = run_job(spec, i / n_methods, i % n_methods);
  }

  for (const Outcome& o : outcomes) {
    if (o.wrong_shape) throw ContractError("repeated_experiment: " + o.error);
  }

  ExperimentResult result;
  result.runs.assign(spec.reps, std::vector<MethodScores>(n_methods));
  for (std::size_t i = 0; i < n_jobs; ++i) {
    const std::size_t rep = i / n_methods;
    const std::size_t m = i % n_methods;
    if (!outcomes[i].ok) result.failures.push_back({rep, spec.methods[m], outcomes[i].error});
    result.runs[rep][m] = std::move(outcomes[i].scores);
  }

  result.rmse_mean = result.rmse_median = result.mae_mean = result.mae_median = empty_table(spec);
  for (std::size_t r = 0; r < spec.rows.size(); ++r) {
    for (std::size_t m = 0; m < n_methods; ++m) {
      std::vector<double> rmse_runs;
      std::vector<double> mae_runs;
      for (std::size_t rep = 0; rep < spec.reps; ++rep) {
        const MethodScores& s = result.runs[rep][m];
        if (s.rmse.empty()) continue;
        rmse_runs.push_back(s.rmse[r]);
        mae_runs.push_back(s.mae[r]);
      }
      if (rmse_runs.empty()) {
        result.warnings.push_back("no successful repetition for " + spec.methods[m] + " on " + spec.rows[r] +
                                  "; cell reported as missing");
      }
      result.rmse_mean.values[r][m] = mean(rmse_runs);
      result.rmse_median.values[r][m] = median(rmse_runs);
      result.mae_mean.values[r][m] = mean(mae_runs);
      result.mae_median.values[r][m] = median(mae_runs);
    }
  }
  return result;
}

}  // namespace tsen
