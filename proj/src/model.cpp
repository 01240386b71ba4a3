#include "tsen/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsen/errors.hpp"

namespace tsen {

void TrainConfig::validate() const {
  if (lookback < 1) throw ContractError("train config: lookback must be at least 1");
  if (horizon < 1) throw ContractError("train config: horizon must be at least 1");
  if (!(learning_rate > 0.0)) throw ContractError("train config: learning rate must be positive");
  if (batch_size < 1) throw ContractError("train config: batch size must be at least 1");
  if (hidden_width < 1) throw ContractError("train config: hidden width must be at least 1");
  if (depth < 1) throw ContractError("train config: depth must be at least 1");
}

ModelShape shape_for(const TrainConfig& config, std::size_t input_width, EncoderKind kind) {
  return {kind, input_width, config.hidden_width, config.depth, config.score, config.lookback};
}

namespace {

OutputHead<Matrix> init_head(std::size_t width, Rng& rng) { return {glorot_uniform(1, width, rng), Matrix(1, 1)}; }

}  // namespace

TsenParameters init_tsen(std::size_t members, const ModelShape& shape, Rng& rng) {
  if (members == 0) throw ContractError("init_tsen: a group needs at least one member");
  TsenParameters p;
  p.lookback = shape.lookback;
  for (std::size_t j = 0; j < members; ++j) {
    BasicMember<Matrix> m;
    m.encoder = init_encoder(shape.kind, shape.input_width, shape.hidden_width, shape.depth, rng);
    m.attention = init_attention(shape.hidden_width, shape.hidden_width, shape.score, rng);
    m.head = init_head(shape.hidden_width, rng);
    p.members.push_back(std::move(m));
  }
  return p;
}

BaselineParameters init_baseline(const ModelShape& shape, Rng& rng) {
  BaselineParameters p;
  p.lookback = shape.lookback;
  p.encoder = init_encoder(shape.kind, shape.input_width, shape.hidden_width, shape.depth, rng);
  p.head = init_head(shape.hidden_width, rng);
  return p;
}

std::size_t tsen_parameter_count(std::size_t members, const ModelShape& shape) {
  const std::size_t encoder = encoder_parameter_count(shape.kind, shape.input_width, shape.hidden_width, shape.depth);
  const std::size_t attention = attention_parameter_count(shape.hidden_width, shape.hidden_width, shape.score);
  const std::size_t head = shape.hidden_width + 1;
  return members * (encoder + attention + head);
}

std::size_t baseline_parameter_count(const ModelShape& shape) {
  return encoder_parameter_count(shape.kind, shape.input_width, shape.hidden_width, shape.depth) +
         shape.hidden_width + 1;
}

BoundTsen bind(ad::Tape& tape, const TsenParameters& p, bool trainable) {
  BoundTsen out;
  out.lookback = p.lookback;
  for (const auto& m : p.members) {
    BasicMember<ad::Var> b;
    b.encoder = bind(tape, m.encoder, trainable);
    b.attention = bind(tape, m.attention, trainable);
    b.head = bind_block<OutputHead>(tape, m.head, trainable);
    out.members.push_back(std::move(b));
  }
  return out;
}

BoundBaseline bind(ad::Tape& tape, const BaselineParameters& p, bool trainable) {
  BoundBaseline out;
  out.lookback = p.lookback;
  out.encoder = bind(tape, p.encoder, trainable);
  out.head = bind_block<OutputHead>(tape, p.head, trainable);
  return out;
}

namespace {

ad::Var apply_head(ad::Var features, const OutputHead<ad::Var>& head) {
  return ad::add_bias(ad::matmul(head.w_o, features), head.b_o);
}

}  // namespace

TsenOutputs tsen_forward(std::span<const std::vector<ad::Var>> member_windows, const BoundTsen& p) {
  if (member_windows.size() != p.members.size()) {
    throw ContractError("tsen_forward: " + std::to_string(member_windows.size()) + " windows for " +
                        std::to_string(p.members.size()) + " members");
  }
  std::vector<ad::Var> encoded;
  encoded.reserve(p.members.size());
  for (std::size_t j = 0; j < p.members.size(); ++j) {
    encoded.push_back(encode_sequence(member_windows[j], p.members[j].encoder));
  }
  TsenOutputs out;
  for (std::size_t j = 0; j < p.members.size(); ++j) {
    Attended a = attend(encoded[j], encoded, p.members[j].attention);
    out.predictions.push_back(apply_head(a.output, p.members[j].head));
    out.attention.push_back(a.weights);
  }
  return out;
}

ad::Var baseline_forward(std::span<const ad::Var> window, const BoundBaseline& p) {
  return apply_head(encode_sequence(window, p.encoder), p.head);
}

namespace {

std::vector<std::vector<ad::Var>> constants(ad::Tape& tape, std::span<const std::vector<Matrix>> member_windows) {
  std::vector<std::vector<ad::Var>> out;
  for (const auto& steps : member_windows) {
    std::vector<ad::Var> bound;
    for (const Matrix& x : steps) bound.push_back(tape.constant(x));
    out.push_back(std::move(bound));
  }
  return out;
}

}  // namespace

std::vector<Matrix> tsen_forward(std::span<const std::vector<Matrix>> member_windows, const TsenParameters& p) {
  ad::Tape tape;
  auto windows = constants(tape, member_windows);
  TsenOutputs out = tsen_forward(windows, bind(tape, p, false));
  std::vector<Matrix> preds;
  for (const ad::Var& v : out.predictions) preds.push_back(v.value());
  return preds;
}

Matrix baseline_forward(std::span<const Matrix> window, const BaselineParameters& p) {
  ad::Tape tape;
  std::vector<ad::Var> steps;
  for (const Matrix& x : window) steps.push_back(tape.constant(x));
  return baseline_forward(steps, bind(tape, p, false)).value();
}

namespace {

void check_loss_shapes(std::size_t n_pred, std::size_t n_target) {
  if (n_pred != n_target || n_pred == 0) {
    throw ContractError("mse_loss: " + std::to_string(n_pred) + " prediction blocks for " +
                        std::to_string(n_target) + " target blocks");
  }
}

}  // namespace

double mse_loss(std::span<const Matrix> predictions, std::span<const Matrix> targets) {
  check_loss_shapes(predictions.size(), targets.size());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    if (!predictions[j].same_shape(targets[j])) {
      throw ContractError("mse_loss: prediction " + predictions[j].shape_string() + " vs target " +
                          targets[j].shape_string());
    }
    auto p = predictions[j].data();
    auto t = targets[j].data();
    for (std::size_t i = 0; i < p.size(); ++i) total += (t[i] - p[i]) * (t[i] - p[i]);
    count += p.size();
  }
  return total / static_cast<double>(count);
}

ad::Var mse_loss(std::span<const ad::Var> predictions, std::span<const Matrix> targets) {
  check_loss_shapes(predictions.size(), targets.size());
  ad::Tape& tape = *predictions.front().tape;
  ad::Var total;
  std::size_t count = 0;
  for (std::size_t j = 0; j < predictions.size(); ++j) {
    if (!predictions[j].value().same_shape(targets[j])) {
      throw ContractError("mse_loss: prediction " + predictions[j].value().shape_string() + " vs target " +
                          targets[j].shape_string());
    }
    ad::Var diff = ad::sub(predictions[j], tape.constant(targets[j]));
    ad::Var sq = ad::sum_all(ad::mul(diff, diff));
    total = j == 0 ? sq : ad::add(total, sq);
    count += targets[j].size();
  }
  return ad::affine(total, 1.0 / static_cast<double>(count), 0.0);
}

std::vector<Matrix> batch_steps(const SupervisedSet& set, std::span<const std::size_t> indices) {
  std::vector<Matrix> steps;
  steps.reserve(set.lookback);
  for (std::size_t r = 0; r < set.lookback; ++r) {
    Matrix x(set.width, indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) {
      const Matrix& w = set.samples[indices[b]].window;
      for (std::size_t f = 0; f < set.width; ++f) x(f, b) = w(r, f);
    }
    steps.push_back(std::move(x));
  }
  return steps;
}

Matrix batch_labels(const SupervisedSet& set, std::span<const std::size_t> indices) {
  Matrix y(1, indices.size());
  for (std::size_t b = 0; b < indices.size(); ++b) y(0, b) = set.samples[indices[b]].label;
  return y;
}

namespace {

void check_group(std::span<const SupervisedSet> group) {
  if (group.empty()) throw ContractError("group has no members");
  for (const auto& s : group) {
    if (s.size() != group.front().size() || s.lookback != group.front().lookback) {
      throw ContractError("group members are not windowed on a shared time index");
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.samples[i].window_end != group.front().samples[i].window_end) {
        throw ContractError("group member '" + s.series_id + "' is misaligned at sample " + std::to_string(i));
      }
    }
  }
}

struct GroupBatch {
  std::vector<std::vector<Matrix>> windows;
  std::vector<Matrix> labels;
};

GroupBatch make_group_batch(std::span<const SupervisedSet> group, std::span<const std::size_t> indices) {
  GroupBatch b;
  for (const auto& s : group) {
    b.windows.push_back(batch_steps(s, indices));
    b.labels.push_back(batch_labels(s, indices));
  }
  return b;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// Mini-batch Adam over shuffled sample order. `batch_loss` records the loss
// of the given sample indices on the tape against the bound parameters.
template <class P, class BatchLoss>
TrainResult<P> fit(P params, std::size_t n, const TrainConfig& config, Rng& rng, BatchLoss&& batch_loss) {
  std::vector<Matrix*> slots;
  std::vector<std::string> names;
  for_each_param(params, [&](const std::string& name, Matrix& m) {
    slots.push_back(&m);
    names.push_back(name);
  });
  AdamState state;
  const AdamConfig adam = config.adam();
  std::vector<std::size_t> order = all_indices(n);
  TrainResult<P> result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(config.batch_size, n - start));
      ad::Tape tape;
      auto bound = bind(tape, params, true);
      ad::Var loss = batch_loss(tape, bound, idx);
      tape.backward(loss);
      std::vector<Matrix> grads;
      grads.reserve(slots.size());
      for_each_param(bound, [&](const std::string&, ad::Var& v) { grads.push_back(tape.gradient(v)); });
      adam_step(slots, grads, state, adam, names);
      total += loss.value()(0, 0) * static_cast<double>(idx.size());
    }
    const double epoch_loss = total / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
    result.loss_trace.push_back(epoch_loss);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace

TrainResult<TsenParameters> train(std::span<const SupervisedSet> group, const TrainConfig& config) {
  config.validate();
  check_group(group);
  const std::size_t n = group.front().size();
  if (n == 0) throw DataError("train: no samples (series shorter than lookback + horizon)");
  Rng rng(config.seed);
  TsenParameters init = init_tsen(group.size(), shape_for(config, group.front().width, config.encoder), rng);
  return fit(std::move(init), n, config, rng, [&](ad::Tape& tape, const BoundTsen& bound, std::span<const std::size_t> idx) {
    GroupBatch batch = make_group_batch(group, idx);
    auto windows = constants(tape, batch.windows);
    return mse_loss(tsen_forward(windows, bound).predictions, batch.labels);
  });
}

TrainResult<BaselineParameters> train_baseline(const SupervisedSet& set, EncoderKind kind, const TrainConfig& config) {
  config.validate();
  if (set.size() == 0) throw DataError("train_baseline: no samples (series shorter than lookback + horizon)");
  Rng rng(config.seed);
  BaselineParameters init = init_baseline(shape_for(config, set.width, kind), rng);
  return fit(std::move(init), set.size(), config, rng,
             [&](ad::Tape& tape, const BoundBaseline& bound, std::span<const std::size_t> idx) {
               std::vector<ad::Var> steps;
               for (Matrix& x : batch_steps(set, idx)) steps.push_back(tape.constant(std::move(x)));
               const Matrix labels[] = {batch_labels(set, idx)};
               const ad::Var preds[] = {baseline_forward(steps, bound)};
               return mse_loss(preds, labels);
             });
}

std::vector<std::vector<double>> predict(const TsenParameters& p, std::span<const SupervisedSet> group) {
  check_group(group);
  const auto idx = all_indices(group.front().size());
  GroupBatch batch = make_group_batch(group, idx);
  std::vector<Matrix> preds = tsen_forward(batch.windows, p);
  std::vector<std::vector<double>> out;
  for (const Matrix& m : preds) out.emplace_back(m.data().begin(), m.data().end());
  return out;
}

std::vector<double> predict(const BaselineParameters& p, const SupervisedSet& set) {
  const auto idx = all_indices(set.size());
  Matrix preds = baseline_forward(batch_steps(set, idx), p);
  return {preds.data().begin(), preds.data().end()};
}

double evaluate_loss(const TsenParameters& p, std::span<const SupervisedSet> group) {
  check_group(group);
  const auto idx = all_indices(group.front().size());
  GroupBatch batch = make_group_batch(group, idx);
  return mse_loss(tsen_forward(batch.windows, p), batch.labels);
}

double evaluate_loss(const BaselineParameters& p, const SupervisedSet& set) {
  const auto idx = all_indices(set.size());
  const Matrix preds[] = {baseline_forward(batch_steps(set, idx), p)};
  const Matrix labels[] = {batch_labels(set, idx)};
  return mse_loss(preds, labels);
}

std::vector<std::vector<std::vector<double>>> attention_weights(const TsenParameters& p,
                                                                std::span<const SupervisedSet> group) {
  check_group(group);
  const auto idx = all_indices(group.front().size());
  GroupBatch batch = make_group_batch(group, idx);
  ad::Tape tape;
  auto windows = constants(tape, batch.windows);
  TsenOutputs out = tsen_forward(windows, bind(tape, p, false));
  std::vector<std::vector<std::vector<double>>> result;
  for (const ad::Var& w : out.attention) {
    const Matrix& m = w.value();
    std::vector<std::vector<double>> per_sample(m.cols(), std::vector<double>(m.rows()));
    for (std::size_t s = 0; s < m.rows(); ++s)
      for (std::size_t b = 0; b < m.cols(); ++b) per_sample[b][s] = m(s, b);
    result.push_back(std::move(per_sample));
  }
  return result;
}

namespace {

std::vector<Matrix> window_steps(const Matrix& window, std::size_t lookback) {
  if (window.rows() != lookback) {
    throw ContractError("forecast: window has " + std::to_string(window.rows()) + " steps, model lookback is " +
                        std::to_string(lookback));
  }
  std::vector<Matrix> steps;
  for (std::size_t r = 0; r < window.rows(); ++r) steps.push_back(Matrix::column(window.row(r)));
  return steps;
}

}  // namespace

std::vector<double> forecast(const TsenParameters& p, std::span<const Matrix> latest_windows,
                             std::span<const ColumnStats> target_scales) {
  if (latest_windows.size() != p.members.size() || target_scales.size() != p.members.size()) {
    throw ContractError("forecast: expected one window and one target scale per member");
  }
  std::vector<std::vector<Matrix>> windows;
  for (const Matrix& w : latest_windows) windows.push_back(window_steps(w, p.lookback));
  std::vector<Matrix> preds = tsen_forward(windows, p);
  std::vector<double> out;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    const double y = target_scales[j].denormalize(preds[j](0, 0));
    if (!std::isfinite(y)) throw NumericError("forecast: non-finite prediction for member " + std::to_string(j));
    out.push_back(y);
  }
  return out;
}

double forecast(const BaselineParameters& p, const Matrix& latest_window, const ColumnStats& target_scale) {
  const double y = target_scale.denormalize(baseline_forward(window_steps(latest_window, p.lookback), p)(0, 0));
  if (!std::isfinite(y)) throw NumericError("forecast: non-finite prediction");
  return y;
}

template <class P>
void import_tensors(P& params, std::span<const NamedTensor> tensors) {
  std::size_t i = 0;
  for_each_param(params, [&](const std::string& name, Matrix& m) {
    if (i >= tensors.size()) throw ContractError("parameter file is missing tensor '" + name + "'");
    const NamedTensor& t = tensors[i++];
    if (t.name != name) throw ContractError("parameter file has tensor '" + t.name + "' where '" + name + "' belongs");
    if (!t.value.same_shape(m)) {
      throw ContractError("tensor '" + name + "' has shape " + t.value.shape_string() + ", expected " +
                          m.shape_string());
    }
    m = t.value;
  });
  if (i != tensors.size()) throw ContractError("parameter file has " + std::to_string(tensors.size() - i) + " extra tensors");
}

template void import_tensors<TsenParameters>(TsenParameters&, std::span<const NamedTensor>);
template void import_tensors<BaselineParameters>(BaselineParameters&, std::span<const NamedTensor>);

}  // namespace tsen
