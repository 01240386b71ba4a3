#include "tsen/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsen/errors.hpp"

namespace tsen {

std::string_view to_string(ScoreKind kind) { return kind == ScoreKind::dot ? "dot" : "general"; }

ScoreKind parse_score_kind(std::string_view name) {
  if (name == "dot") return ScoreKind::dot;
  if (name == "general") return ScoreKind::general;
  throw UsageError("unknown score function '" + std::string(name) + "' (expected dot or general)");
}

AttentionParams init_attention(std::size_t hidden_width, std::size_t output_width, ScoreKind score, Rng& rng) {
  AttentionParams p;
  p.score = score;
  p.head.w_a = glorot_uniform(output_width, 2 * hidden_width, rng);
  if (score == ScoreKind::general) p.head.w_score = glorot_uniform(hidden_width, hidden_width, rng);
  return p;
}

std::size_t attention_parameter_count(std::size_t hidden_width, std::size_t output_width, ScoreKind score) {
  return output_width * 2 * hidden_width + (score == ScoreKind::general ? hidden_width * hidden_width : 0);
}

BoundAttention bind(ad::Tape& tape, const AttentionParams& p, bool trainable) {
  BoundAttention out;
  out.score = p.score;
  auto reg = [&](const Matrix& m) { return trainable ? tape.leaf(m) : tape.constant(m); };
  out.head.w_a = reg(p.head.w_a);
  if (p.score == ScoreKind::general) out.head.w_score = reg(p.head.w_score);
  return out;
}

double score(const Matrix& h, const Matrix& h_bar) {
  if (h.cols() != 1 || h_bar.cols() != 1 || h.rows() != h_bar.rows()) {
    throw ShapeError("score: width mismatch " + h.shape_string() + " vs " + h_bar.shape_string());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i) s += h(i, 0) * h_bar(i, 0);
  return s;
}

std::vector<double> attention_weights(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("attention_weights: no scores");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> alpha(scores.size());
  double total = 0.0;
  for (std::size_t s = 0; s < scores.size(); ++s) {
    alpha[s] = std::exp(scores[s] - top);
    total += alpha[s];
  }
  for (double& a : alpha) a /= total;
  return alpha;
}

Attended attend(ad::Var query, std::span<const ad::Var> keys, const BoundAttention& p) {
  if (keys.empty()) throw ContractError("attend: empty key set");
  const Matrix& q = query.value();
  for (const ad::Var& k : keys) {
    if (!k.value().same_shape(q)) {
      throw ShapeError("attend: key " + k.value().shape_string() + " vs query " + q.shape_string());
    }
  }
  std::vector<ad::Var> scores;
  scores.reserve(keys.size());
  for (const ad::Var& k : keys) {
    ad::Var projected = p.score == ScoreKind::general ? ad::matmul(p.head.w_score, k) : k;
    scores.push_back(ad::col_dot(query, projected));
  }
  ad::Var alpha = ad::softmax_cols(ad::concat_rows(scores));
  ad::Var context;
  for (std::size_t s = 0; s < keys.size(); ++s) {
    ad::Var term = ad::scale_cols(keys[s], ad::slice_rows(alpha, s, 1));
    context = s == 0 ? term : ad::add(context, term);
  }
  const ad::Var joined[] = {query, context};
  return {ad::tanh(ad::matmul(p.head.w_a, ad::concat_rows(joined))), alpha};
}

Matrix attend(const Matrix& query, std::span<const Matrix> keys, const AttentionParams& p) {
  ad::Tape tape;
  std::vector<ad::Var> bound_keys;
  bound_keys.reserve(keys.size());
  for (const Matrix& k : keys) bound_keys.push_back(tape.constant(k));
  return attend(tape.constant(query), bound_keys, bind(tape, p, false)).output.value();
}

}  // namespace tsen
