#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tsen/adam.hpp"
#include "tsen/attention.hpp"
#include "tsen/encoders.hpp"
#include "tsen/matrix.hpp"
#include "tsen/prep.hpp"
#include "tsen/rng.hpp"
#include "tsen/tape.hpp"

namespace tsen {

struct TrainConfig {
  std::size_t lookback = 12;
  std::size_t horizon = 3;
  double learning_rate = 0.005;
  std::size_t epochs = 50;
  std::size_t batch_size = 1;
  std::size_t hidden_width = 16;
  std::size_t depth = 2;
  EncoderKind encoder = EncoderKind::lstm;
  ScoreKind score = ScoreKind::dot;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Throws ContractError on k < 1, h < 1, lr <= 0, batch < 1, width < 1 or depth < 1.
  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, adam_epsilon}; }
};

/// Linear head y = w_o a + b_o with identity activation; w_o is (1 x width).
template <class T>
struct OutputHead {
  T w_o;
  T b_o;

  static constexpr std::array<const char*, 2> names{"w_o", "b_o"};
  auto members() { return std::tie(w_o, b_o); }
  auto members() const { return std::tie(w_o, b_o); }
};

/// Everything one group member owns: its encoder, its attention head over
/// the whole group, and its output head.
template <class T>
struct BasicMember {
  BasicEncoderStack<T> encoder;
  BasicAttentionParams<T> attention;
  OutputHead<T> head;
};

template <class T>
struct BasicTsenParameters {
  std::size_t lookback = 0;
  std::vector<BasicMember<T>> members;
};

/// Standalone single-series model: encoder and linear head, no attention.
template <class T>
struct BasicBaselineParameters {
  std::size_t lookback = 0;
  BasicEncoderStack<T> encoder;
  OutputHead<T> head;
};

using TsenParameters = BasicTsenParameters<Matrix>;
using BaselineParameters = BasicBaselineParameters<Matrix>;
using BoundTsen = BasicTsenParameters<ad::Var>;
using BoundBaseline = BasicBaselineParameters<ad::Var>;

/// Architecture of one model, independent of its weights.
struct ModelShape {
  EncoderKind kind = EncoderKind::lstm;
  std::size_t input_width = 1;
  std::size_t hidden_width = 16;
  std::size_t depth = 2;
  ScoreKind score = ScoreKind::dot;
  std::size_t lookback = 12;
};

ModelShape shape_for(const TrainConfig& config, std::size_t input_width, EncoderKind kind);

TsenParameters init_tsen(std::size_t members, const ModelShape& shape, Rng& rng);
BaselineParameters init_baseline(const ModelShape& shape, Rng& rng);

/// J * (encoder + attention + head) scalars.
std::size_t tsen_parameter_count(std::size_t members, const ModelShape& shape);
std::size_t baseline_parameter_count(const ModelShape& shape);

template <class T, class F>
void for_each_param(BasicTsenParameters<T>& p, F&& f) {
  for (std::size_t j = 0; j < p.members.size(); ++j) {
    const std::string prefix = "member" + std::to_string(j) + ".";
    for_each_param(p.members[j].encoder, prefix + "encoder.", f);
    for_each_param(p.members[j].attention, prefix + "attention.", f);
    for_each_member(p.members[j].head, [&](const std::string& name, T& m) { f(prefix + "head." + name, m); });
  }
}

template <class T, class F>
void for_each_param(BasicBaselineParameters<T>& p, F&& f) {
  for_each_param(p.encoder, "encoder.", f);
  for_each_member(p.head, [&](const std::string& name, T& m) { f("head." + name, m); });
}

template <class P>
std::size_t parameter_count(P& params) {
  std::size_t n = 0;
  for_each_param(params, [&](const std::string&, auto& m) { n += m.size(); });
  return n;
}

BoundTsen bind(ad::Tape& tape, const TsenParameters& p, bool trainable);
BoundBaseline bind(ad::Tape& tape, const BaselineParameters& p, bool trainable);

struct TsenOutputs {
  std::vector<ad::Var> predictions;  // per member, (1 x batch)
  std::vector<ad::Var> attention;    // per member, (members x batch)
};

/// Encodes every member window with its own encoder, attends each member's
/// encoding over all members' encodings with its own head, and applies its
/// linear head. `member_windows[j]` holds member j's time steps, each
/// (width x batch).
TsenOutputs tsen_forward(std::span<const std::vector<ad::Var>> member_windows, const BoundTsen& p);
ad::Var baseline_forward(std::span<const ad::Var> window, const BoundBaseline& p);

std::vector<Matrix> tsen_forward(std::span<const std::vector<Matrix>> member_windows, const TsenParameters& p);
Matrix baseline_forward(std::span<const Matrix> window, const BaselineParameters& p);

/// (1 / (J * H)) * sum_j sum_h (y - y_hat)^2 over J prediction blocks of H
/// entries each. Throws ContractError on shape mismatch.
double mse_loss(std::span<const Matrix> predictions, std::span<const Matrix> targets);
ad::Var mse_loss(std::span<const ad::Var> predictions, std::span<const Matrix> targets);

template <class P>
struct TrainResult {
  P params;
  std::vector<double> loss_trace;  // mean training loss per epoch
};

/// Trains one group end to end with Adam on the multi-output MSE. The
/// members' sets must be windowed on the same time index. Throws DataError
/// when there are no samples.
TrainResult<TsenParameters> train(std::span<const SupervisedSet> group, const TrainConfig& config);

TrainResult<BaselineParameters> train_baseline(const SupervisedSet& set, EncoderKind kind, const TrainConfig& config);

/// Full-data MSE in normalized units.
double evaluate_loss(const TsenParameters& p, std::span<const SupervisedSet> group);
double evaluate_loss(const BaselineParameters& p, const SupervisedSet& set);

/// Normalized predictions for every sample, per member.
std::vector<std::vector<double>> predict(const TsenParameters& p, std::span<const SupervisedSet> group);
std::vector<double> predict(const BaselineParameters& p, const SupervisedSet& set);

/// Attention weights per member and sample: result[j][sample][s].
std::vector<std::vector<std::vector<double>>> attention_weights(const TsenParameters& p,
                                                                std::span<const SupervisedSet> group);

/// Predictions from the latest (lookback x width) windows, mapped back to
/// the original target scale. Throws ContractError when a window's length
/// differs from the model's lookback.
std::vector<double> forecast(const TsenParameters& p, std::span<const Matrix> latest_windows,
                             std::span<const ColumnStats> target_scales);
double forecast(const BaselineParameters& p, const Matrix& latest_window, const ColumnStats& target_scale);

/// Time steps of the given samples as (width x batch) matrices.
std::vector<Matrix> batch_steps(const SupervisedSet& set, std::span<const std::size_t> indices);
Matrix batch_labels(const SupervisedSet& set, std::span<const std::size_t> indices);

struct NamedTensor {
  std::string name;
  Matrix value;
};

template <class P>
std::vector<NamedTensor> export_tensors(P& params) {
  std::vector<NamedTensor> out;
  for_each_param(params, [&](const std::string& name, Matrix& m) { out.push_back({name, m}); });
  return out;
}

/// Copies tensors into an already-shaped parameter set. Names and shapes must
/// match exactly; throws ContractError otherwise.
template <class P>
void import_tensors(P& params, std::span<const NamedTensor> tensors);

}  // namespace tsen
