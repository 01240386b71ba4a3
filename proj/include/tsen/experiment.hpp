#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsen/evalstats.hpp"

namespace tsen {

/// Per-row scores of one method in one repetition.
struct MethodScores {
  std::vector<double> rmse;
  std::vector<double> mae;
};

/// Runs method `method` for repetition `rep`. `seed` is shared by every
/// method of the same repetition so they see the same data draw.
using ExperimentJob = std::function<MethodScores(std::size_t rep, std::size_t method, std::uint64_t seed)>;

struct ExperimentSpec {
  std::vector<std::string> rows;     // series ids
  std::vector<std::string> methods;
  std::size_t reps = 1;
  std::uint64_t master_seed = 0;
  ExperimentJob job;
};

enum class Execution { serial, parallel };

struct JobFailure {
  std::size_t rep = 0;
  std::string method;
  std::string message;
};

struct ExperimentResult {
  ScoreTable rmse_mean;
  ScoreTable rmse_median;
  ScoreTable mae_mean;
  ScoreTable mae_median;
  std::vector<std::vector<MethodScores>> runs;  // [rep][method]; empty scores on failure
  std::vector<JobFailure> failures;
  std::vector<std::string> warnings;
};

/// Seed of repetition `rep` under `master`.
std::uint64_t repetition_seed(std::uint64_t master, std::size_t rep);

/// Runs every (rep, method) job and aggregates per-cell means and medians
/// over the repetitions that succeeded. A failing job is recorded and the run
/// continues; a cell with no successful repetition is NaN plus a warning.
/// Both execution modes give identical results. Throws ContractError when
/// reps < 1, there are no methods, or a job returns the wrong row count.
ExperimentResult repeated_experiment(const ExperimentSpec& spec, Execution execution = Execution::parallel);

double median(std::vector<double> values);

}  // namespace tsen
