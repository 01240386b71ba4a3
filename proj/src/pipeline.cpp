#include "tsen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <initializer_list>
#include <limits>
#include <set>

#include <json.hpp>

#include "tsen/errors.hpp"
#include "tsen/io.hpp"
#include "tsen/varma.hpp"

#ifndef TSEN_VERSION
#define TSEN_VERSION "0.0.0"
#endif

namespace tsen {

using json = nlohmann::ordered_json;

std::string_view version() { return TSEN_VERSION; }

TrainConfig RunConfig::training() const {
  TrainConfig t = train;
  t.hidden_width = model.hidden_width;
  t.depth = model.depth;
  t.score = model.score;
  return t;
}

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> known) {
  if (!obj.is_object()) throw UsageError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("config: unknown key '" + where + "." + key + "'");
    }
  }
}

std::string path_of(const std::string& section, const char* key) { return section + "." + key; }

void read(const json& obj, const std::string& section, const char* key, std::size_t& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) throw UsageError("config: '" + path_of(section, key) + "' must be a non-negative integer");
  out = v.get<std::size_t>();
}

void read(const json& obj, const std::string& section, const char* key, double& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) throw UsageError("config: '" + path_of(section, key) + "' must be a number");
  out = v.get<double>();
}

void read(const json& obj, const std::string& section, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw UsageError("config: '" + path_of(section, key) + "' must be true or false");
  out = v.get<bool>();
}

void read(const json& obj, const std::string& section, const char* key, std::string& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_string()) throw UsageError("config: '" + path_of(section, key) + "' must be a string");
  out = v.get<std::string>();
}

void read(const json& obj, const std::string& section, const char* key, std::vector<std::string>& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); })) {
    throw UsageError("config: '" + path_of(section, key) + "' must be a list of strings");
  }
  out = v.get<std::vector<std::string>>();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError("config: " + message);
}

void validate(const RunConfig& c) {
  require(c.data.train_fraction > 0.0 && c.data.train_fraction < 1.0, "data.train_fraction must lie in (0, 1)");
  require(!c.cluster.k || *c.cluster.k >= 1, "cluster.k must be at least 1");
  require(!c.model.methods.empty(), "model.methods must not be empty");
  std::set<std::string> seen;
  for (const auto& m : c.model.methods) {
    parse_method(m);
    require(seen.insert(m).second, "model.methods lists '" + m + "' twice");
  }
  require(c.model.hidden_width >= 1, "model.hidden_width must be at least 1");
  require(c.model.depth >= 1, "model.depth must be at least 1");
  require(c.train.lookback >= 1, "train.lookback must be at least 1");
  require(c.train.horizon >= 1, "train.horizon must be at least 1");
  require(c.train.learning_rate > 0.0, "train.learning_rate must be positive");
  require(c.train.epochs >= 1, "train.epochs must be at least 1");
  require(c.train.batch_size >= 1, "train.batch_size must be at least 1");
  require(c.train.beta1 >= 0.0 && c.train.beta1 < 1.0, "train.beta1 must lie in [0, 1)");
  require(c.train.beta2 >= 0.0 && c.train.beta2 < 1.0, "train.beta2 must lie in [0, 1)");
  require(c.train.adam_epsilon > 0.0, "train.adam_epsilon must be positive");
  require(!c.eval.out_dir.empty(), "eval.out_dir must not be empty");
  for (const auto& m : c.model.methods) {
    require(!(parse_method(m).kind == EncoderKind::cnn && c.train.lookback < kConvWidth),
            "method '" + m + "' needs train.lookback >= " + std::to_string(kConvWidth));
  }
}

json config_json(const RunConfig& c) {
  json j;
  j["data"] = {{"panel", c.data.panel},
               {"train_fraction", c.data.train_fraction},
               {"exclude", c.data.exclude},
               {"forward_fill", c.data.forward_fill}};
  j["cluster"] = {{"k", c.cluster.k ? json(*c.cluster.k) : json(nullptr)}, {"linkage", std::string(to_string(c.cluster.linkage))}};
  j["model"] = {{"methods", c.model.methods},
                {"hidden_width", c.model.hidden_width},
                {"depth", c.model.depth},
                {"score", std::string(to_string(c.model.score))}};
  j["train"] = {{"lookback", c.train.lookback},         {"horizon", c.train.horizon},
                {"learning_rate", c.train.learning_rate}, {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},     {"seed", c.train.seed},
                {"beta1", c.train.beta1},               {"beta2", c.train.beta2},
                {"adam_epsilon", c.train.adam_epsilon}};
  j["eval"] = {{"out_dir", c.eval.out_dir}};
  return j;
}

RunConfig config_from_json(const json& root) {
  check_keys(root, "config", {"data", "cluster", "model", "train", "eval"});
  RunConfig c;
  const json empty = json::object();
  auto section = [&](const char* name) -> const json& { return root.contains(name) ? root.at(name) : empty; };

  const json& data = section("data");
  check_keys(data, "data", {"panel", "train_fraction", "exclude", "forward_fill"});
  read(data, "data", "panel", c.data.panel);
  read(data, "data", "train_fraction", c.data.train_fraction);
  read(data, "data", "exclude", c.data.exclude);
  read(data, "data", "forward_fill", c.data.forward_fill);

  const json& cluster = section("cluster");
  check_keys(cluster, "cluster", {"k", "linkage"});
  if (cluster.contains("k") && !cluster.at("k").is_null()) {
    std::size_t k = 0;
    read(cluster, "cluster", "k", k);
    c.cluster.k = k;
  }
  std::string linkage(to_string(c.cluster.linkage));
  read(cluster, "cluster", "linkage", linkage);
  try {
    c.cluster.linkage = parse_linkage(linkage);
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }

  const json& model = section("model");
  check_keys(model, "model", {"methods", "hidden_width", "depth", "score"});
  read(model, "model", "methods", c.model.methods);
  read(model, "model", "hidden_width", c.model.hidden_width);
  read(model, "model", "depth", c.model.depth);
  std::string score(to_string(c.model.score));
  read(model, "model", "score", score);
  try {
    c.model.score = parse_score_kind(score);
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }

  const json& train = section("train");
  check_keys(train, "train",
             {"lookback", "horizon", "learning_rate", "epochs", "batch_size", "seed", "beta1", "beta2", "adam_epsilon"});
  read(train, "train", "lookback", c.train.lookback);
  read(train, "train", "horizon", c.train.horizon);
  read(train, "train", "learning_rate", c.train.learning_rate);
  read(train, "train", "epochs", c.train.epochs);
  read(train, "train", "batch_size", c.train.batch_size);
  read(train, "train", "seed", c.train.seed);
  read(train, "train", "beta1", c.train.beta1);
  read(train, "train", "beta2", c.train.beta2);
  read(train, "train", "adam_epsilon", c.train.adam_epsilon);

  const json& eval = section("eval");
  check_keys(eval, "eval", {"out_dir"});
  read(eval, "eval", "out_dir", c.eval.out_dir);

  validate(c);
  return c;
}

}  // namespace

RunConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(root);
}

RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IngestError&) {
    throw UsageError("cannot read config file '" + path + "'");
  }
  return parse_config(text);
}

std::string config_to_json(const RunConfig& config) { return config_json(config).dump(2); }

Method parse_method(std::string_view name) {
  Method m;
  m.name = std::string(name);
  std::string_view kind = name;
  if (kind.substr(0, 5) == "tsen-") {
    m.tsen = true;
    kind.remove_prefix(5);
  }
  try {
    m.kind = parse_encoder_kind(kind);
  } catch (const Error&) {
    throw UsageError("unknown method '" + std::string(name) + "' (expected [tsen-]lstm|gru|rnn|cnn)");
  }
  return m;
}

std::vector<std::string> all_methods() {
  return {"tsen-gru", "tsen-lstm", "tsen-rnn", "tsen-cnn", "gru", "lstm", "rnn", "cnn"};
}

PreparedData prepare(const TimeSeriesPanel& panel, double train_fraction, std::size_t lookback, std::size_t horizon) {
  PreparedData d;
  d.raw = panel;
  d.normalizer = fit_normalizer(panel, train_fraction);
  d.normalized = normalize(panel, d.normalizer);
  for (const SupervisedSet& set : make_windows(d.normalized, lookback, horizon)) {
    auto [train, test] = chronological_split(set, train_fraction);
    d.train.push_back(std::move(train));
    d.test.push_back(std::move(test));
  }
  return d;
}

DistanceMatrix training_distances(const PreparedData& data) {
  std::vector<std::vector<double>> targets;
  for (const Series& s : data.normalized.series) {
    targets.emplace_back(s.target.begin(), s.target.begin() + static_cast<std::ptrdiff_t>(data.normalizer.fitted_steps));
  }
  return pairwise_distance(targets);
}

GroupPartition cluster_series(const PreparedData& data, const ClusterConfig& config) {
  if (!config.k) throw UsageError("config: cluster.k is required (number of groups)");
  if (*config.k > data.raw.size()) {
    throw UsageError("cluster.k = " + std::to_string(*config.k) + " exceeds the " + std::to_string(data.raw.size()) +
                     " series in the panel");
  }
  return label(agglomerate(training_distances(data), *config.k, config.linkage), data.raw.ids());
}

namespace {

struct TrainJob {
  const Method* method;
  std::size_t group;
  std::vector<std::size_t> members;
  std::uint64_t seed;
};

FittedModel run_train_job(const PreparedData& data, const TrainJob& job, const TrainConfig& base) {
  TrainConfig cfg = base;
  cfg.encoder = job.method->kind;
  cfg.seed = job.seed;
  FittedModel out;
  out.method = job.method->name;
  out.group = job.group;
  for (std::size_t s : job.members) out.members.push_back(data.raw.series[s].id);
  out.shape = shape_for(cfg, data.raw.input_width(), cfg.encoder);
  if (job.method->tsen) {
    std::vector<SupervisedSet> sets;
    for (std::size_t s : job.members) sets.push_back(data.train[s]);
    auto result = train(sets, cfg);
    out.params = std::move(result.params);
    out.loss_trace = std::move(result.loss_trace);
  } else {
    auto result = train_baseline(data.train[job.members.front()], cfg.encoder, cfg);
    out.params = std::move(result.params);
    out.loss_trace = std::move(result.loss_trace);
  }
  return out;
}

std::vector<std::size_t> member_indices(const PreparedData& data, const FittedModel& model) {
  std::vector<std::size_t> idx;
  for (const auto& id : model.members) idx.push_back(data.raw.index_of(id));
  return idx;
}

}  // namespace

std::vector<FittedModel> fit_models(const PreparedData& data, const GroupPartition& partition,
                                    std::span<const Method> methods, const TrainConfig& config, Execution execution) {
  if (partition.series_ids != data.raw.ids()) throw ContractError("fit_models: partition does not match the panel");
  const auto groups = partition.groups();
  std::vector<TrainJob> jobs;
  for (const Method& m : methods) {
    if (m.tsen) {
      for (std::size_t g = 0; g < groups.size(); ++g) jobs.push_back({&m, g, groups[g], derive_seed(config.seed, {0, g})});
    } else {
      for (std::size_t s = 0; s < data.raw.size(); ++s) {
        jobs.push_back({&m, partition.assignment[s], {s}, derive_seed(config.seed, {1, s})});
      }
    }
  }
  std::vector<FittedModel> models(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  auto run = [&](std::size_t i) {
    try {
      models[i] = run_train_job(data, jobs[i], config);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
  } else {
    for (std::size_t i = 0; i < jobs.size(); ++i) run(i);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return models;
}

std::map<std::string, std::vector<double>> predict_test(const PreparedData& data, const FittedModel& model) {
  const auto idx = member_indices(data, model);
  std::vector<std::vector<double>> normalized;
  if (const auto* p = std::get_if<TsenParameters>(&model.params)) {
    std::vector<SupervisedSet> sets;
    for (std::size_t s : idx) sets.push_back(data.test[s]);
    normalized = predict(*p, sets);
  } else {
    normalized.push_back(predict(std::get<BaselineParameters>(model.params), data.test[idx.front()]));
  }
  std::map<std::string, std::vector<double>> out;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const ColumnStats& scale = data.normalizer.target(idx[j]);
    std::vector<double> y;
    for (double z : normalized[j]) y.push_back(scale.denormalize(z));
    out[model.members[j]] = std::move(y);
  }
  return out;
}

std::vector<double> test_actuals(const PreparedData& data, std::size_t series) {
  std::vector<double> y;
  for (const Sample& s : data.test.at(series).samples) y.push_back(data.raw.series[series].target[s.label_index]);
  return y;
}

MetricTables score_models(const PreparedData& data, std::span<const FittedModel> models,
                          std::span<const std::string> methods) {
  MetricTables t;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (ScoreTable* table : {&t.rmse, &t.mae, &t.mse}) {
    table->rows = data.raw.ids();
    table->cols.assign(methods.begin(), methods.end());
    table->values.assign(data.raw.size(), std::vector<double>(methods.size(), nan));
  }
  for (const FittedModel& model : models) {
    const auto col = std::find(methods.begin(), methods.end(), model.method);
    if (col == methods.end()) continue;
    const auto c = static_cast<std::size_t>(col - methods.begin());
    for (const auto& [id, pred] : predict_test(data, model)) {
      const std::size_t r = data.raw.index_of(id);
      const auto actual = test_actuals(data, r);
      t.rmse.values[r][c] = rmse(pred, actual);
      t.mae.values[r][c] = mae(pred, actual);
      t.mse.values[r][c] = mse(pred, actual);
    }
  }
  return t;
}

std::vector<AttentionRow> test_attention(const PreparedData& data, const FittedModel& model) {
  const auto* p = std::get_if<TsenParameters>(&model.params);
  if (p == nullptr) return {};
  const auto idx = member_indices(data, model);
  std::vector<SupervisedSet> sets;
  for (std::size_t s : idx) sets.push_back(data.test[s]);
  const auto weights = attention_weights(*p, sets);
  std::vector<AttentionRow> rows;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (std::size_t n = 0; n < sets[j].size(); ++n) {
      const std::string& date = data.raw.dates[sets[j].samples[n].label_index];
      for (std::size_t s = 0; s < idx.size(); ++s) rows.push_back({model.members[j], date, model.members[s], weights[j][n][s]});
    }
  }
  return rows;
}

namespace {

json shape_json(const ModelShape& s) {
  return {{"kind", std::string(to_string(s.kind))}, {"input_width", s.input_width}, {"hidden_width", s.hidden_width},
          {"depth", s.depth},                       {"score", std::string(to_string(s.score))}, {"lookback", s.lookback}};
}

template <class P>
json tensors_json(P params) {
  json out = json::array();
  for (const NamedTensor& t : export_tensors(params)) {
    out.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()},
                   {"values", std::vector<double>(t.value.data().begin(), t.value.data().end())}});
  }
  return out;
}

template <class P>
P tensors_from_json(P params, const json& arr) {
  std::vector<NamedTensor> tensors;
  for (const json& t : arr) {
    tensors.push_back({t.at("name").get<std::string>(),
                       Matrix(t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>(),
                              t.at("values").get<std::vector<double>>())});
  }
  import_tensors(params, std::span<const NamedTensor>(tensors));
  return params;
}

}  // namespace

std::string model_file_to_json(const ModelFile& file) {
  json root;
  root["format"] = "tsen-model";
  root["version"] = std::string(version());
  root["config"] = config_json(file.config);
  root["partition"] = {{"series_ids", file.partition.series_ids},
                       {"assignment", file.partition.assignment},
                       {"k", file.partition.k}};
  json columns = json::array();
  for (const auto& series : file.normalizer.columns) {
    json cols = json::array();
    for (const ColumnStats& c : series) cols.push_back({c.location, c.scale});
    columns.push_back(std::move(cols));
  }
  root["normalizer"] = {{"series_ids", file.normalizer.series_ids},
                        {"fitted_steps", file.normalizer.fitted_steps},
                        {"columns", std::move(columns)}};
  root["exog_names"] = file.exog_names;
  json models = json::array();
  for (const FittedModel& m : file.models) {
    json entry = {{"method", m.method}, {"group", m.group}, {"members", m.members}, {"shape", shape_json(m.shape)},
                  {"loss_trace", m.loss_trace}};
    entry["tensors"] = std::visit([](const auto& p) { return tensors_json(p); }, m.params);
    models.push_back(std::move(entry));
  }
  root["models"] = std::move(models);
  return root.dump(1) + "\n";
}

ModelFile parse_model_file(std::string_view json_text) {
  try {
    const json root = json::parse(json_text);
    if (root.at("format") != "tsen-model") throw ContractError("not a tsen model file");
    ModelFile f;
    f.config = config_from_json(root.at("config"));
    const json& part = root.at("partition");
    f.partition.series_ids = part.at("series_ids").get<std::vector<std::string>>();
    f.partition.assignment = part.at("assignment").get<std::vector<std::size_t>>();
    f.partition.k = part.at("k").get<std::size_t>();
    f.partition.validate();
    const json& norm = root.at("normalizer");
    f.normalizer.series_ids = norm.at("series_ids").get<std::vector<std::string>>();
    f.normalizer.fitted_steps = norm.at("fitted_steps").get<std::size_t>();
    for (const json& series : norm.at("columns")) {
      std::vector<ColumnStats> cols;
      for (const json& c : series) cols.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
      f.normalizer.columns.push_back(std::move(cols));
    }
    f.exog_names = root.at("exog_names").get<std::vector<std::string>>();
    for (const json& entry : root.at("models")) {
      FittedModel m;
      m.method = entry.at("method").get<std::string>();
      m.group = entry.at("group").get<std::size_t>();
      m.members = entry.at("members").get<std::vector<std::string>>();
      m.loss_trace = entry.at("loss_trace").get<std::vector<double>>();
      const json& s = entry.at("shape");
      m.shape = {parse_encoder_kind(s.at("kind").get<std::string>()), s.at("input_width").get<std::size_t>(),
                 s.at("hidden_width").get<std::size_t>(),           s.at("depth").get<std::size_t>(),
                 parse_score_kind(s.at("score").get<std::string>()),  s.at("lookback").get<std::size_t>()};
      Rng placeholder(0);
      if (parse_method(m.method).tsen) {
        m.params = tensors_from_json(init_tsen(m.members.size(), m.shape, placeholder), entry.at("tensors"));
      } else {
        m.params = tensors_from_json(init_baseline(m.shape, placeholder), entry.at("tensors"));
      }
      f.models.push_back(std::move(m));
    }
    return f;
  } catch (const json::exception& e) {
    throw ContractError(std::string("malformed model file: ") + e.what());
  }
}

ExperimentResult run_bench(const BenchConfig& config, Execution execution) {
  const SimCase sim = sim_case(config.case_id);
  std::vector<Method> methods;
  for (const auto& name : config.methods) methods.push_back(parse_method(name));

  ExperimentSpec spec;
  for (std::size_t s = 0; s < sim.n_mts; ++s) spec.rows.push_back("region" + std::to_string(s + 1));
  spec.methods = config.methods;
  spec.reps = config.reps;
  spec.master_seed = config.seed;
  spec.job = [&](std::size_t, std::size_t method, std::uint64_t seed) {
    Rng rng(seed);
    const PreparedData data =
        prepare(compose_case(sim, rng), config.train_fraction, config.train.lookback, config.train.horizon);
    GroupPartition whole;
    whole.series_ids = data.raw.ids();
    whole.assignment.assign(data.raw.size(), 0);
    whole.k = 1;
    TrainConfig t = config.train;
    t.seed = derive_seed(seed, {1});
    const auto models = fit_models(data, whole, std::span<const Method>(&methods[method], 1), t, Execution::serial);
    const std::string names[] = {config.methods[method]};
    const MetricTables tables = score_models(data, models, names);
    MethodScores out;
    for (std::size_t r = 0; r < data.raw.size(); ++r) {
      out.rmse.push_back(tables.rmse.values[r][0]);
      out.mae.push_back(tables.mae.values[r][0]);
    }
    return out;
  };
  return repeated_experiment(spec, execution);
}

}  // namespace tsen
