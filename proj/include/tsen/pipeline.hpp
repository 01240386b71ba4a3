#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsen/clusterscreen.hpp"
#include "tsen/evalstats.hpp"
#include "tsen/experiment.hpp"
#include "tsen/model.hpp"
#include "tsen/panel.hpp"
#include "tsen/prep.hpp"

namespace tsen {

std::string_view version();

struct DataConfig {
  std::string panel;
  double train_fraction = 0.7;
  std::vector<std::string> exclude;
  bool forward_fill = false;
};

struct ClusterConfig {
  std::optional<std::size_t> k;  // required by commands that cluster
  Linkage linkage = Linkage::average;
};

struct ModelConfig {
  std::vector<std::string> methods{"tsen-lstm"};
  std::size_t hidden_width = 16;
  std::size_t depth = 2;
  ScoreKind score = ScoreKind::dot;
};

struct EvalConfig {
  std::string out_dir = "out";
};

struct RunConfig {
  DataConfig data;
  ClusterConfig cluster;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  /// TrainConfig with the model section's width, depth and score applied.
  TrainConfig training() const;
};

/// Parses the JSON config; every field is optional. Throws UsageError on
/// malformed JSON, unknown keys, wrong types or conflicting values.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::string& path);
/// Fully resolved config as pretty JSON.
std::string config_to_json(const RunConfig& config);

/// "tsen-<kind>" or a standalone "<kind>" with kind in lstm, gru, rnn, cnn.
struct Method {
  std::string name;
  bool tsen = false;
  EncoderKind kind = EncoderKind::lstm;
};
/// Throws UsageError on an unknown name.
Method parse_method(std::string_view name);
std::vector<std::string> all_methods();

/// Normalized panel, its statistics and per-series chronological splits.
struct PreparedData {
  TimeSeriesPanel raw;
  TimeSeriesPanel normalized;
  NormalizationState normalizer;
  std::vector<SupervisedSet> train;  // per series, panel order
  std::vector<SupervisedSet> test;
};

PreparedData prepare(const TimeSeriesPanel& panel, double train_fraction, std::size_t lookback, std::size_t horizon);

/// Distances between normalized targets over the normalizer's fit window only.
DistanceMatrix training_distances(const PreparedData& data);
/// Throws UsageError when k is unset or exceeds the number of series.
GroupPartition cluster_series(const PreparedData& data, const ClusterConfig& config);

/// One trained unit: a TSEN over a group, or a baseline over one series.
struct FittedModel {
  std::string method;
  std::size_t group = 0;
  std::vector<std::string> members;
  ModelShape shape;
  std::variant<TsenParameters, BaselineParameters> params;
  std::vector<double> loss_trace;
};

/// Trains every method on every group (TSEN) or series (baselines). Jobs run
/// in parallel under Execution::parallel; results come back in job order.
std::vector<FittedModel> fit_models(const PreparedData& data, const GroupPartition& partition,
                                    std::span<const Method> methods, const TrainConfig& config,
                                    Execution execution = Execution::parallel);

/// Test-split predictions on the original scale, keyed by series id.
std::map<std::string, std::vector<double>> predict_test(const PreparedData& data, const FittedModel& model);
/// Test-split labels on the original scale.
std::vector<double> test_actuals(const PreparedData& data, std::size_t series);

struct MetricTables {
  ScoreTable rmse;
  ScoreTable mae;
  ScoreTable mse;
};

/// Rows are series in panel order, columns are `methods`.
MetricTables score_models(const PreparedData& data, std::span<const FittedModel> models,
                          std::span<const std::string> methods);

/// Per-sample attention rows of a TSEN model over the test split.
struct AttentionRow {
  std::string series_id;
  std::string date;  // label date
  std::string key_id;
  double weight = 0.0;
};
std::vector<AttentionRow> test_attention(const PreparedData& data, const FittedModel& model);

struct ModelFile {
  RunConfig config;
  GroupPartition partition;
  NormalizationState normalizer;
  std::vector<std::string> exog_names;
  std::vector<FittedModel> models;
};

std::string model_file_to_json(const ModelFile& file);
/// Throws ContractError when the file is malformed or inconsistent.
ModelFile parse_model_file(std::string_view json_text);

struct BenchConfig {
  int case_id = 2;
  std::size_t reps = 5;
  std::uint64_t seed = 1;
  double train_fraction = 0.7;
  std::vector<std::string> methods = all_methods();
  TrainConfig train = [] {
    TrainConfig t;
    t.batch_size = 64;
    t.epochs = 50;
    return t;
  }();
};

/// The simulation protocol: each repetition draws a fresh panel for the case,
/// trains every method with all series in one group, and scores the test
/// split on the original scale.
ExperimentResult run_bench(const BenchConfig& config, Execution execution = Execution::parallel);

}  // namespace tsen
