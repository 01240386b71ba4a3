#include "tsen/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsen/errors.hpp"
#include "tsen/io.hpp"
#include "tsen/pipeline.hpp"
#include "tsen/varma.hpp"

namespace tsen {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void log_run(const std::string& command, const json& config) {
  json line = {{"event", "run"}, {"command", command}, {"version", std::string(version())}, {"config", config}};
  std::cerr << line.dump() << "\n";
}

void write_json(const std::string& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json run_header(const std::string& command, const json& config) {
  return {{"command", command}, {"version", std::string(version())}, {"config", config}};
}

std::string json_config_of(const RunConfig& c) { return config_to_json(c); }

TimeSeriesPanel load_configured_panel(const RunConfig& c) {
  if (c.data.panel.empty()) throw UsageError("config: data.panel is required for this command");
  PanelReadOptions options;
  options.exclude.insert(c.data.exclude.begin(), c.data.exclude.end());
  options.forward_fill = c.data.forward_fill;
  return load_panel(c.data.panel, options);
}

std::vector<Method> configured_methods(const RunConfig& c) {
  std::vector<Method> out;
  for (const auto& m : c.model.methods) out.push_back(parse_method(m));
  return out;
}

std::string partition_csv(const GroupPartition& p) {
  std::string out = "series_id,group\n";
  for (std::size_t s = 0; s < p.series_ids.size(); ++s) out += p.series_ids[s] + ',' + std::to_string(p.assignment[s]) + '\n';
  return out;
}

std::string distances_csv(const DistanceMatrix& d, const std::vector<std::string>& ids) {
  std::string out = "series_id";
  for (const auto& id : ids) out += ',' + id;
  out += '\n';
  for (std::size_t u = 0; u < d.size(); ++u) {
    out += ids[u];
    for (std::size_t v = 0; v < d.size(); ++v) out += ',' + format_double(d(u, v));
    out += '\n';
  }
  return out;
}

json test_json(const TestResult& t, const std::vector<std::string>& cols) {
  json j = {{"test", t.method}, {"statistic", t.statistic}, {"p_value", t.p_value}, {"n", t.n}};
  if (t.method == "friedman") {
    j["df"] = t.df;
    json ranks = json::object();
    for (std::size_t c = 0; c < cols.size(); ++c) ranks[cols[c]] = t.average_ranks[c];
    j["average_ranks"] = std::move(ranks);
  }
  j["detail"] = t.detail;
  return j;
}

json skipped(const std::string& test, const std::string& reason) {
  return {{"test", test}, {"skipped", true}, {"reason", reason}};
}

int cmd_simulate(int case_id, std::uint64_t seed, const std::string& out) {
  const SimCase sim = sim_case(case_id);
  json config = {{"case", case_id}, {"seed", seed}, {"out", out}};
  log_run("simulate", config);
  Rng rng(seed);
  write_panel(out, compose_case(sim, rng));
  std::cout << "wrote case " << case_id << " panel (" << sim.n_mts << " series, " << sim.n_obs << " steps) to " << out
            << "\n";
  return 0;
}

int cmd_cluster(const RunConfig& c) {
  const json config = json::parse(json_config_of(c));
  log_run("cluster", config);
  const PreparedData data = prepare(load_configured_panel(c), c.data.train_fraction, c.train.lookback, c.train.horizon);
  const DistanceMatrix d = training_distances(data);
  const GroupPartition p = cluster_series(data, c.cluster);
  const auto ids = data.raw.ids();
  write_file_atomic(join(c.eval.out_dir, "distances.csv"), distances_csv(d, ids));
  write_file_atomic(join(c.eval.out_dir, "partition.csv"), partition_csv(p));
  json merges = json::array();
  for (const Merge& m : merge_sequence(d, c.cluster.linkage)) {
    merges.push_back({{"left", ids[m.left]}, {"right", ids[m.right]}, {"distance", m.distance}});
  }
  json report = run_header("cluster", config);
  report["seed"] = c.train.seed;
  report["merges"] = std::move(merges);
  report["groups"] = p.assignment;
  report["silhouette"] = p.k > 1 && p.k < ids.size() ? json(silhouette_score(d, p)) : json(nullptr);
  report["warnings"] = data.normalizer.warnings;
  write_json(join(c.eval.out_dir, "cluster_report.json"), report);
  const auto groups = p.groups();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::cout << "group " << g << ":";
    for (std::size_t s : groups[g]) std::cout << ' ' << ids[s];
    std::cout << "\n";
  }
  return 0;
}

int cmd_train(const RunConfig& c) {
  const json config = json::parse(json_config_of(c));
  log_run("train", config);
  const PreparedData data = prepare(load_configured_panel(c), c.data.train_fraction, c.train.lookback, c.train.horizon);
  const GroupPartition partition = cluster_series(data, c.cluster);
  const auto methods = configured_methods(c);
  ModelFile file{c, partition, data.normalizer, data.raw.exog_names, fit_models(data, partition, methods, c.training())};
  const std::string model_path = join(c.eval.out_dir, "model.json");
  write_file_atomic(model_path, model_file_to_json(file));
  std::string trace = "method,group,first_member,epoch,loss\n";
  for (const FittedModel& m : file.models) {
    for (std::size_t e = 0; e < m.loss_trace.size(); ++e) {
      trace += m.method + ',' + std::to_string(m.group) + ',' + m.members.front() + ',' + std::to_string(e) + ',' +
               format_double(m.loss_trace[e]) + '\n';
    }
  }
  write_file_atomic(join(c.eval.out_dir, "loss_trace.csv"), trace);
  json losses = json::array();
  for (const FittedModel& m : file.models) {
    losses.push_back({{"method", m.method}, {"group", m.group}, {"members", m.members},
                      {"final_loss", m.loss_trace.empty() ? json(nullptr) : json(m.loss_trace.back())}});
  }
  json report = run_header("train", config);
  report["seed"] = c.train.seed;
  report["groups"] = partition.assignment;
  report["models"] = std::move(losses);
  report["warnings"] = data.normalizer.warnings;
  write_json(join(c.eval.out_dir, "train_report.json"), report);
  std::cout << "trained " << file.models.size() << " models; parameters in " << model_path << "\n";
  return 0;
}

ModelFile load_model(const RunConfig& c, const std::string& model_path) {
  const std::string path = model_path.empty() ? join(c.eval.out_dir, "model.json") : model_path;
  return parse_model_file(read_file(path));
}

int cmd_forecast(const RunConfig& c, const std::string& model_path) {
  const json config = json::parse(json_config_of(c));
  log_run("forecast", config);
  const ModelFile file = load_model(c, model_path);
  const TimeSeriesPanel raw = load_configured_panel(c);
  if (raw.ids() != file.normalizer.series_ids || raw.exog_names != file.exog_names) {
    throw ContractError("forecast: panel series or columns differ from the ones the model was trained on");
  }
  const TimeSeriesPanel normalized = normalize(raw, file.normalizer);
  std::string csv = "series_id,method,origin_date,horizon,forecast\n";
  for (const FittedModel& m : file.models) {
    std::vector<Matrix> windows;
    std::vector<ColumnStats> scales;
    for (const auto& id : m.members) {
      const std::size_t s = raw.index_of(id);
      windows.push_back(latest_window(normalized.series[s], m.shape.lookback));
      scales.push_back(file.normalizer.target(s));
    }
    std::vector<double> y;
    if (const auto* p = std::get_if<TsenParameters>(&m.params)) {
      y = forecast(*p, windows, scales);
    } else {
      y.push_back(forecast(std::get<BaselineParameters>(m.params), windows.front(), scales.front()));
    }
    for (std::size_t j = 0; j < y.size(); ++j) {
      csv += m.members[j] + ',' + m.method + ',' + raw.dates.back() + ',' + std::to_string(c.train.horizon) + ',' +
             format_double(y[j]) + '\n';
    }
  }
  write_file_atomic(join(c.eval.out_dir, "forecasts.csv"), csv);
  json report = run_header("forecast", config);
  report["seed"] = c.train.seed;
  report["origin_date"] = raw.dates.back();
  report["horizon"] = c.train.horizon;
  write_json(join(c.eval.out_dir, "forecast_report.json"), report);
  std::cout << csv;
  return 0;
}

int cmd_evaluate(const RunConfig& c, const std::string& model_path) {
  const json config = json::parse(json_config_of(c));
  log_run("evaluate", config);
  const ModelFile file = load_model(c, model_path);
  const PreparedData data = prepare(load_configured_panel(c), c.data.train_fraction, c.train.lookback, c.train.horizon);
  if (data.raw.ids() != file.normalizer.series_ids) {
    throw ContractError("evaluate: panel series differ from the ones the model was trained on");
  }
  std::vector<std::string> methods;
  for (const FittedModel& m : file.models) {
    if (std::find(methods.begin(), methods.end(), m.method) == methods.end()) methods.push_back(m.method);
  }
  const MetricTables tables = score_models(data, file.models, methods);
  write_file_atomic(join(c.eval.out_dir, "metrics_rmse.csv"), score_table_to_csv(tables.rmse));
  write_file_atomic(join(c.eval.out_dir, "metrics_mae.csv"), score_table_to_csv(tables.mae));
  write_file_atomic(join(c.eval.out_dir, "metrics_mse.csv"), score_table_to_csv(tables.mse));

  std::string predictions = "series_id,method,date,actual,predicted\n";
  std::string attention = "method,series_id,date,key_id,weight\n";
  for (const FittedModel& m : file.models) {
    for (const auto& [id, pred] : predict_test(data, m)) {
      const std::size_t s = data.raw.index_of(id);
      const auto actual = test_actuals(data, s);
      for (std::size_t n = 0; n < pred.size(); ++n) {
        predictions += id + ',' + m.method + ',' + data.raw.dates[data.test[s].samples[n].label_index] + ',' +
                       format_double(actual[n]) + ',' + format_double(pred[n]) + '\n';
      }
    }
    for (const AttentionRow& r : test_attention(data, m)) {
      attention += m.method + ',' + r.series_id + ',' + r.date + ',' + r.key_id + ',' + format_double(r.weight) + '\n';
    }
  }
  write_file_atomic(join(c.eval.out_dir, "predictions.csv"), predictions);
  write_file_atomic(join(c.eval.out_dir, "attention.csv"), attention);
  json report = run_header("evaluate", config);
  report["seed"] = c.train.seed;
  report["test_samples_per_series"] = data.test.front().size();
  report["scale"] = "original";
  write_json(join(c.eval.out_dir, "evaluate_report.json"), report);
  std::cout << score_table_to_csv(tables.rmse);
  return 0;
}

int cmd_compare(const std::string& scores_path, std::string a, std::string b, const std::string& alternative_name,
                std::string out_dir) {
  const Alternative alternative = parse_alternative(alternative_name);
  if (out_dir.empty()) out_dir = fs::path(scores_path).parent_path().string();
  json config = {{"scores", scores_path}, {"a", a}, {"b", b}, {"alternative", alternative_name}, {"out", out_dir}};
  log_run("compare", config);
  const ScoreTable full = load_score_table(scores_path);
  full.validate_shape();
  const ScoreTable table = full.complete_rows();
  std::vector<std::string> warnings;
  for (const auto& row : full.rows) {
    if (std::find(table.rows.begin(), table.rows.end(), row) == table.rows.end()) {
      warnings.push_back("row '" + row + "' has a missing score and is excluded");
    }
  }

  std::vector<json> lines;
  std::optional<TestResult> fr;
  if (table.rows.size() >= 2 && table.cols.size() >= 2) {
    fr = friedman(table);
    lines.push_back(test_json(*fr, table.cols));
  } else {
    lines.push_back(skipped("friedman", "needs at least 2 complete rows and 2 methods"));
  }

  if (a.empty() || b.empty()) {
    if (table.cols.size() >= 2) {
      std::vector<std::size_t> order(table.cols.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      if (fr) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return fr->average_ranks[x] < fr->average_ranks[y]; });
      }
      if (a.empty()) a = table.cols[order[0]];
      if (b.empty()) b = table.cols[order[a == table.cols[order[1]] ? 0 : 1]];
    }
  }
  if (a.empty() || b.empty() || a == b) {
    lines.push_back(skipped("wilcoxon", "needs two distinct methods"));
  } else {
    const auto xa = table.column(table.column_index(a));
    const auto xb = table.column(table.column_index(b));
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < xa.size(); ++i) nonzero += xa[i] != xb[i];
    if (nonzero < kWilcoxonMinPairs) {
      json line = skipped("wilcoxon", std::to_string(nonzero) + " non-zero paired differences; at least " +
                                          std::to_string(kWilcoxonMinPairs) + " required");
      line["a"] = a;
      line["b"] = b;
      lines.push_back(std::move(line));
    } else {
      json line = test_json(wilcoxon_signed_rank(xa, xb, alternative), table.cols);
      line["a"] = a;
      line["b"] = b;
      line["alternative"] = std::string(to_string(alternative));
      lines.push_back(std::move(line));
    }
  }

  std::string jsonl;
  for (const json& l : lines) jsonl += l.dump() + "\n";
  write_file_atomic(join(out_dir, "tests.jsonl"), jsonl);
  json report = {{"command", "compare"}, {"version", std::string(version())}, {"config", config},
                 {"rows_used", table.rows}, {"warnings", warnings}};
  write_json(join(out_dir, "compare_report.json"), report);
  for (const json& l : lines) {
    if (l.contains("skipped")) {
      std::cout << l["test"].get<std::string>() << ": skipped (" << l["reason"].get<std::string>() << ")\n";
    } else {
      std::cout << l["test"].get<std::string>() << ": statistic " << format_double(l["statistic"].get<double>())
                << ", p = " << format_double(l["p_value"].get<double>()) << " (" << l["detail"].get<std::string>()
                << ")\n";
    }
  }
  return 0;
}

struct BenchArgs {
  int case_id = 2;
  std::size_t reps = 5;
  std::uint64_t seed = 1;
  std::size_t epochs = 50;
  std::size_t batch = 64;
  std::size_t hidden = 16;
  std::size_t depth = 2;
  std::size_t lookback = 12;
  std::size_t horizon = 3;
  double learning_rate = 0.005;
  std::vector<std::string> methods = all_methods();
  std::string out = "bench_out";
  bool serial = false;
};

int cmd_bench(const BenchArgs& args) {
  BenchConfig b;
  b.case_id = args.case_id;
  b.reps = args.reps;
  b.seed = args.seed;
  b.methods = args.methods;
  b.train.epochs = args.epochs;
  b.train.batch_size = args.batch;
  b.train.hidden_width = args.hidden;
  b.train.depth = args.depth;
  b.train.lookback = args.lookback;
  b.train.horizon = args.horizon;
  b.train.learning_rate = args.learning_rate;
  b.train.validate();
  sim_case(args.case_id);
  if (args.reps < 1) throw UsageError("--reps must be at least 1");
  for (const auto& m : args.methods) parse_method(m);

  json config = {{"case", b.case_id},
                 {"reps", b.reps},
                 {"seed", b.seed},
                 {"train_fraction", b.train_fraction},
                 {"methods", b.methods},
                 {"epochs", b.train.epochs},
                 {"batch_size", b.train.batch_size},
                 {"hidden_width", b.train.hidden_width},
                 {"depth", b.train.depth},
                 {"lookback", b.train.lookback},
                 {"horizon", b.train.horizon},
                 {"learning_rate", b.train.learning_rate},
                 {"score", std::string(to_string(b.train.score))},
                 {"grouping", "all series in one group"}};
  log_run("bench", config);
  const ExperimentResult r = run_bench(b, args.serial ? Execution::serial : Execution::parallel);

  write_file_atomic(join(args.out, "bench_rmse_median.csv"), score_table_to_csv(r.rmse_median));
  write_file_atomic(join(args.out, "bench_rmse_mean.csv"), score_table_to_csv(r.rmse_mean));
  write_file_atomic(join(args.out, "bench_mae_median.csv"), score_table_to_csv(r.mae_median));
  write_file_atomic(join(args.out, "bench_mae_mean.csv"), score_table_to_csv(r.mae_mean));
  std::string runs = "rep,method,series_id,rmse,mae\n";
  for (std::size_t rep = 0; rep < r.runs.size(); ++rep) {
    for (std::size_t m = 0; m < b.methods.size(); ++m) {
      const MethodScores& s = r.runs[rep][m];
      for (std::size_t row = 0; row < s.rmse.size(); ++row) {
        runs += std::to_string(rep) + ',' + b.methods[m] + ',' + r.rmse_median.rows[row] + ',' +
                format_double(s.rmse[row]) + ',' + format_double(s.mae[row]) + '\n';
      }
    }
  }
  write_file_atomic(join(args.out, "bench_runs.csv"), runs);

  std::string tests;
  const ScoreTable complete = r.rmse_median.complete_rows();
  if (complete.rows.size() >= 2 && complete.cols.size() >= 2) {
    tests = test_json(friedman(complete), complete.cols).dump() + "\n";
  } else {
    tests = skipped("friedman", "needs at least 2 complete rows and 2 methods").dump() + "\n";
  }
  write_file_atomic(join(args.out, "bench_tests.jsonl"), tests);

  json failures = json::array();
  for (const JobFailure& f : r.failures) failures.push_back({{"rep", f.rep}, {"method", f.method}, {"message", f.message}});
  json report = run_header("bench", config);
  report["seed"] = b.seed;
  report["scale"] = "original";
  report["aggregate"] = {"median", "mean"};
  report["failures"] = std::move(failures);
  report["warnings"] = r.warnings;
  write_json(join(args.out, "bench_report.json"), report);
  std::cout << "median RMSE over " << b.reps << " repetitions\n" << score_table_to_csv(r.rmse_median);
  return 0;
}

void print_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Multi-series forecasting with clustering and attention"};
  app.name("tsen");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version()));

  int case_id = 0;
  std::uint64_t seed = 0;
  std::string out;
  auto* simulate = app.add_subcommand("simulate", "Write a simulated panel for one of the four cases");
  simulate->add_option("--case", case_id, "Case id")->required()->check(CLI::Range(1, 4));
  simulate->add_option("--seed", seed, "Random seed");
  simulate->add_option("--out", out, "Output panel CSV")->required();

  std::string config_path;
  std::string model_path;
  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "JSON config file")->required(); };
  auto* cluster = app.add_subcommand("cluster", "Group series by distance between training targets");
  add_config(cluster);
  auto* train = app.add_subcommand("train", "Train the configured methods per group");
  add_config(train);
  auto* forecast_cmd = app.add_subcommand("forecast", "Forecast horizon steps past the panel end");
  add_config(forecast_cmd);
  forecast_cmd->add_option("--model", model_path, "Model file (default <out_dir>/model.json)");
  auto* evaluate = app.add_subcommand("evaluate", "Score trained models on the test split");
  add_config(evaluate);
  evaluate->add_option("--model", model_path, "Model file (default <out_dir>/model.json)");

  std::string scores;
  std::string a;
  std::string b;
  std::string alternative = "a_better";
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Friedman and Wilcoxon tests on a score table");
  compare->add_option("--scores", scores, "Score table CSV (rows = series, cols = methods)")->required();
  compare->add_option("--a", a, "First method of the paired test (default: best average rank)");
  compare->add_option("--b", b, "Second method of the paired test (default: runner-up)");
  compare->add_option("--alternative", alternative, "a_better or two_sided");
  compare->add_option("--out", compare_out, "Output directory (default: the score table's directory)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Repeated simulation study over all methods");
  bench->add_option("--case", bench_args.case_id, "Case id")->check(CLI::Range(1, 4));
  bench->add_option("--reps", bench_args.reps, "Repetitions");
  bench->add_option("--seed", bench_args.seed, "Master seed");
  bench->add_option("--epochs", bench_args.epochs, "Training epochs");
  bench->add_option("--batch", bench_args.batch, "Mini-batch size");
  bench->add_option("--hidden", bench_args.hidden, "Hidden width");
  bench->add_option("--depth", bench_args.depth, "Encoder depth");
  bench->add_option("--lookback", bench_args.lookback, "Window length");
  bench->add_option("--horizon", bench_args.horizon, "Forecast horizon");
  bench->add_option("--lr", bench_args.learning_rate, "Adam learning rate");
  bench->add_option("--methods", bench_args.methods, "Methods to run")->delimiter(',');
  bench->add_option("--out", bench_args.out, "Output directory");
  bench->add_flag("--serial", bench_args.serial, "Run repetitions serially");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  if (simulate->parsed()) return cmd_simulate(case_id, seed, out);
  if (compare->parsed()) return cmd_compare(scores, a, b, alternative, compare_out);
  if (bench->parsed()) return cmd_bench(bench_args);
  const RunConfig config = load_config(config_path);
  if (cluster->parsed()) return cmd_cluster(config);
  if (train->parsed()) return cmd_train(config);
  if (forecast_cmd->parsed()) return cmd_forecast(config, model_path);
  return cmd_evaluate(config, model_path);
}

}  // namespace

int run_cli(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
}

int run_cli(std::span<const std::string> args) {
  std::vector<std::string> storage{"tsen"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(storage.size()), argv.data());
}

}  // namespace tsen
