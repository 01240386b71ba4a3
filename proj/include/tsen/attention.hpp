#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "tsen/matrix.hpp"
#include "tsen/params.hpp"
#include "tsen/rng.hpp"
#include "tsen/tape.hpp"

namespace tsen {

/// dot: q . k.  general: q . (W_s k) with a learned bilinear W_s.
enum class ScoreKind { dot, general };

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view name);

/// One attention head. `w_a` is (output x 2*hidden) and acts on [query; context].
/// `w_score` is (hidden x hidden) for ScoreKind::general and empty for dot.
template <class T>
struct AttentionHead {
  T w_a;
  T w_score;

  static constexpr std::array<const char*, 2> names{"w_a", "w_score"};
  auto members() { return std::tie(w_a, w_score); }
  auto members() const { return std::tie(w_a, w_score); }
};

template <class T>
struct BasicAttentionParams {
  ScoreKind score = ScoreKind::dot;
  AttentionHead<T> head;
};

using AttentionParams = BasicAttentionParams<Matrix>;
using BoundAttention = BasicAttentionParams<ad::Var>;

AttentionParams init_attention(std::size_t hidden_width, std::size_t output_width, ScoreKind score, Rng& rng);
std::size_t attention_parameter_count(std::size_t hidden_width, std::size_t output_width, ScoreKind score);

template <class T, class F>
void for_each_param(BasicAttentionParams<T>& p, const std::string& prefix, F&& f) {
  f(prefix + "w_a", p.head.w_a);
  if (p.score == ScoreKind::general) f(prefix + "w_score", p.head.w_score);
}

BoundAttention bind(ad::Tape& tape, const AttentionParams& p, bool trainable);

/// Dot-product similarity of two equal-width column vectors.
double score(const Matrix& h, const Matrix& h_bar);

/// Max-subtracted softmax. Throws ContractError on an empty list.
std::vector<double> attention_weights(std::span<const double> scores);

struct Attended {
  ad::Var output;   // (output x batch)
  ad::Var weights;  // (keys x batch), each column sums to 1
};

/// a = tanh(W_a [query; sum_s alpha_s key_s]) with alpha = softmax of the
/// query-key scores, evaluated column by column.
Attended attend(ad::Var query, std::span<const ad::Var> keys, const BoundAttention& p);

Matrix attend(const Matrix& query, std::span<const Matrix> keys, const AttentionParams& p);

}  // namespace tsen
