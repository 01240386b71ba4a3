#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "tsen/matrix.hpp"
#include "tsen/params.hpp"
#include "tsen/rng.hpp"
#include "tsen/tape.hpp"

namespace tsen {

enum class EncoderKind { lstm, gru, rnn, cnn };

std::string_view to_string(EncoderKind kind);
/// Accepts "lstm", "gru", "rnn", "cnn". Throws UsageError otherwise.
EncoderKind parse_encoder_kind(std::string_view name);

/// Gate weights are (hidden x (hidden + input)) and act on [h_{t-1}; x_t].
template <class T>
struct LstmCell {
  T w_f, w_j, w_c, w_o;
  T b_f, b_j, b_c, b_o;

  static constexpr std::array<const char*, 8> names{"w_f", "w_j", "w_c", "w_o", "b_f", "b_j", "b_c", "b_o"};
  auto members() { return std::tie(w_f, w_j, w_c, w_o, b_f, b_j, b_c, b_o); }
  auto members() const { return std::tie(w_f, w_j, w_c, w_o, b_f, b_j, b_c, b_o); }
};

template <class T>
struct GruCell {
  T w_r, w_z, w;
  T b_r, b_z, b_c;

  static constexpr std::array<const char*, 6> names{"w_r", "w_z", "w", "b_r", "b_z", "b_c"};
  auto members() { return std::tie(w_r, w_z, w, b_r, b_z, b_c); }
  auto members() const { return std::tie(w_r, w_z, w, b_r, b_z, b_c); }
};

/// h_t = tanh(W [h_{t-1}; x_t] + b)
template <class T>
struct RnnCell {
  T w, b;

  static constexpr std::array<const char*, 2> names{"w", "b"};
  auto members() { return std::tie(w, b); }
  auto members() const { return std::tie(w, b); }
};

/// 1-D convolution over time (kernel 3, `channels` filters, tanh), temporal
/// mean-pool, then a dense layer to the hidden width.
template <class T>
struct ConvBlock {
  T kernel;  // channels x (3 * input)
  T bias;    // channels x 1
  T dense_w; // hidden x channels
  T dense_b; // hidden x 1

  static constexpr std::array<const char*, 4> names{"kernel", "bias", "dense_w", "dense_b"};
  auto members() { return std::tie(kernel, bias, dense_w, dense_b); }
  auto members() const { return std::tie(kernel, bias, dense_w, dense_b); }
};

inline constexpr std::size_t kConvWidth = 3;

using LstmCellParams = LstmCell<Matrix>;
using GruCellParams = GruCell<Matrix>;
using RnnCellParams = RnnCell<Matrix>;
using ConvParams = ConvBlock<Matrix>;

template <class T>
using EncoderLayers =
    std::variant<std::vector<LstmCell<T>>, std::vector<GruCell<T>>, std::vector<RnnCell<T>>, ConvBlock<T>>;

template <class T>
struct BasicEncoderStack {
  std::size_t input_width = 0;
  std::size_t hidden_width = 0;
  EncoderLayers<T> layers;

  EncoderKind kind() const { return static_cast<EncoderKind>(layers.index()); }
};

using EncoderStack = BasicEncoderStack<Matrix>;
using BoundEncoder = BasicEncoderStack<ad::Var>;

/// Glorot-uniform weights, zero biases. `depth` is ignored for cnn, whose
/// channel count equals `hidden_width`.
EncoderStack init_encoder(EncoderKind kind, std::size_t input_width, std::size_t hidden_width, std::size_t depth,
                          Rng& rng);

/// Closed-form trainable scalar count.
std::size_t encoder_parameter_count(EncoderKind kind, std::size_t input_width, std::size_t hidden_width,
                                    std::size_t depth);

/// Checks layer widths chain correctly; throws ShapeError otherwise.
void validate(const EncoderStack& stack);

template <class T, class F>
void for_each_param(BasicEncoderStack<T>& stack, const std::string& prefix, F&& f) {
  std::visit(
      [&](auto& layers) {
        using L = std::decay_t<decltype(layers)>;
        if constexpr (std::is_same_v<L, ConvBlock<T>>) {
          for_each_member(layers, [&](const std::string& name, T& m) { f(prefix + "conv." + name, m); });
        } else {
          for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string p = prefix + "layer" + std::to_string(l) + ".";
            for_each_member(layers[l], [&](const std::string& name, T& m) { f(p + name, m); });
          }
        }
      },
      stack.layers);
}

BoundEncoder bind(ad::Tape& tape, const EncoderStack& stack, bool trainable);

struct LstmState {
  ad::Var h;
  ad::Var c;
};

// Tape-level cells. Inputs are (width x batch).
LstmState lstm_step(ad::Var x, ad::Var h_prev, ad::Var c_prev, const LstmCell<ad::Var>& p);
ad::Var gru_step(ad::Var x, ad::Var h_prev, const GruCell<ad::Var>& p);
ad::Var rnn_step(ad::Var x, ad::Var h_prev, const RnnCell<ad::Var>& p);

/// Runs the stack over the time-ordered window from zero states and returns
/// the top layer's final hidden state (hidden x batch).
ad::Var encode_sequence(std::span<const ad::Var> window, const BoundEncoder& stack);

// Value-level conveniences over the same code path.
std::pair<Matrix, Matrix> lstm_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                                    const LstmCellParams& p);
Matrix gru_step(const Matrix& x, const Matrix& h_prev, const GruCellParams& p);
Matrix rnn_step(const Matrix& x, const Matrix& h_prev, const RnnCellParams& p);
Matrix encode_sequence(std::span<const Matrix> window, const EncoderStack& stack);

}  // namespace tsen
