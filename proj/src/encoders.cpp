#include "tsen/encoders.hpp"

#include <cmath>
#include <type_traits>

#include "tsen/errors.hpp"

namespace tsen {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data()) v = uniform(rng, -a, a);
  return m;
}

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::lstm:
      return "lstm";
    case EncoderKind::gru:
      return "gru";
    case EncoderKind::rnn:
      return "rnn";
    case EncoderKind::cnn:
      return "cnn";
  }
  return "?";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "lstm") return EncoderKind::lstm;
  if (name == "gru") return EncoderKind::gru;
  if (name == "rnn") return EncoderKind::rnn;
  if (name == "cnn") return EncoderKind::cnn;
  throw UsageError("unknown encoder kind '" + std::string(name) + "' (expected lstm, gru, rnn or cnn)");
}

namespace {

template <template <class> class Cell>
Cell<Matrix> init_gated(std::size_t input, std::size_t hidden, Rng& rng) {
  Cell<Matrix> cell;
  // Weights first, in declaration order, so the draw sequence is fixed.
  for_each_member(cell, [&](const std::string& name, Matrix& m) {
    if (name.front() == 'w') m = glorot_uniform(hidden, hidden + input, rng);
    else m = Matrix(hidden, 1);
  });
  return cell;
}

std::size_t gate_count(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::lstm:
      return 4;
    case EncoderKind::gru:
      return 3;
    default:
      return 1;
  }
}

void require_rows(const Matrix& m, std::size_t rows, const char* what) {
  if (m.rows() != rows) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + " rows, got " + m.shape_string());
  }
}

// x and h must be column batches of the widths the gate matrix expects.
void check_step_inputs(const Matrix& w, const Matrix& x, const Matrix& h, const char* op) {
  const std::size_t hidden = w.rows();
  if (h.rows() != hidden || w.cols() != hidden + x.rows() || x.cols() != h.cols()) {
    throw ShapeError(std::string(op) + ": weights " + w.shape_string() + " incompatible with x " +
                     x.shape_string() + " and h " + h.shape_string());
  }
}

ad::Var gate(const ad::Var& w, const ad::Var& b, ad::Var hx) { return ad::add_bias(ad::matmul(w, hx), b); }

LstmCell<ad::Var> bind_cell(ad::Tape& t, const LstmCellParams& c, bool trainable) {
  return bind_block<LstmCell>(t, c, trainable);
}
GruCell<ad::Var> bind_cell(ad::Tape& t, const GruCellParams& c, bool trainable) {
  return bind_block<GruCell>(t, c, trainable);
}
RnnCell<ad::Var> bind_cell(ad::Tape& t, const RnnCellParams& c, bool trainable) {
  return bind_block<RnnCell>(t, c, trainable);
}

ad::Var zeros_like_batch(ad::Tape& tape, std::size_t rows, std::size_t batch) {
  return tape.constant(Matrix(rows, batch));
}

}  // namespace

EncoderStack init_encoder(EncoderKind kind, std::size_t input_width, std::size_t hidden_width, std::size_t depth,
                          Rng& rng) {
  if (input_width == 0 || hidden_width == 0) throw ContractError("init_encoder: widths must be positive");
  if (depth == 0) throw ContractError("init_encoder: depth must be at least 1");
  EncoderStack stack;
  stack.input_width = input_width;
  stack.hidden_width = hidden_width;
  auto fill = [&]<template <class> class Cell>() {
    std::vector<Cell<Matrix>> layers;
    for (std::size_t l = 0; l < depth; ++l) layers.push_back(init_gated<Cell>(l == 0 ? input_width : hidden_width, hidden_width, rng));
    return layers;
  };
  switch (kind) {
    case EncoderKind::lstm:
      stack.layers = fill.operator()<LstmCell>();
      break;
    case EncoderKind::gru:
      stack.layers = fill.operator()<GruCell>();
      break;
    case EncoderKind::rnn:
      stack.layers = fill.operator()<RnnCell>();
      break;
    case EncoderKind::cnn: {
      ConvParams conv;
      conv.kernel = glorot_uniform(hidden_width, kConvWidth * input_width, rng);
      conv.bias = Matrix(hidden_width, 1);
      conv.dense_w = glorot_uniform(hidden_width, hidden_width, rng);
      conv.dense_b = Matrix(hidden_width, 1);
      stack.layers = std::move(conv);
      break;
    }
  }
  return stack;
}

std::size_t encoder_parameter_count(EncoderKind kind, std::size_t input_width, std::size_t hidden_width,
                                    std::size_t depth) {
  const std::size_t h = hidden_width;
  if (kind == EncoderKind::cnn) return h * kConvWidth * input_width + h + h * h + h;
  std::size_t total = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t in = l == 0 ? input_width : hidden_width;
    total += gate_count(kind) * (h * (h + in) + h);
  }
  return total;
}

void validate(const EncoderStack& stack) {
  const std::size_t h = stack.hidden_width;
  std::visit(
      [&](const auto& layers) {
        using L = std::decay_t<decltype(layers)>;
        if constexpr (std::is_same_v<L, ConvParams>) {
          if (layers.kernel.rows() != h || layers.kernel.cols() != kConvWidth * stack.input_width ||
              layers.bias.rows() != h || layers.dense_w.rows() != h || layers.dense_w.cols() != h ||
              layers.dense_b.rows() != h) {
            throw ShapeError("encoder: convolution block shapes do not match widths");
          }
        } else {
          if (layers.empty()) throw ShapeError("encoder: stack has no layers");
          for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::size_t in = l == 0 ? stack.input_width : h;
            for_each_member(layers[l], [&](const std::string& name, const Matrix& m) {
              const bool weight = name.front() == 'w';
              if (m.rows() != h || m.cols() != (weight ? h + in : 1)) {
                throw ShapeError("encoder: layer " + std::to_string(l) + " " + name + " has shape " +
                                 m.shape_string());
              }
            });
          }
        }
      },
      stack.layers);
}

BoundEncoder bind(ad::Tape& tape, const EncoderStack& stack, bool trainable) {
  BoundEncoder out;
  out.input_width = stack.input_width;
  out.hidden_width = stack.hidden_width;
  std::visit(
      [&](const auto& layers) {
        using L = std::decay_t<decltype(layers)>;
        if constexpr (std::is_same_v<L, ConvParams>) {
          out.layers = bind_block<ConvBlock>(tape, layers, trainable);
        } else {
          using CellM = typename L::value_type;
          std::vector<decltype(bind_cell(tape, std::declval<const CellM&>(), trainable))> bound;
          for (const auto& cell : layers) bound.push_back(bind_cell(tape, cell, trainable));
          out.layers = std::move(bound);
        }
      },
      stack.layers);
  return out;
}

LstmState lstm_step(ad::Var x, ad::Var h_prev, ad::Var c_prev, const LstmCell<ad::Var>& p) {
  check_step_inputs(p.w_f.value(), x.value(), h_prev.value(), "lstm_step");
  if (!c_prev.value().same_shape(h_prev.value())) {
    throw ShapeError("lstm_step: cell state " + c_prev.value().shape_string() + " vs hidden " +
                     h_prev.value().shape_string());
  }
  const ad::Var parts[] = {h_prev, x};
  ad::Var hx = ad::concat_rows(parts);
  ad::Var f = ad::sigmoid(gate(p.w_f, p.b_f, hx));
  ad::Var j = ad::sigmoid(gate(p.w_j, p.b_j, hx));
  ad::Var candidate = ad::tanh(gate(p.w_c, p.b_c, hx));
  ad::Var c = ad::add(ad::mul(f, c_prev), ad::mul(j, candidate));
  ad::Var o = ad::sigmoid(gate(p.w_o, p.b_o, hx));
  return {ad::mul(o, ad::tanh(c)), c};
}

ad::Var gru_step(ad::Var x, ad::Var h_prev, const GruCell<ad::Var>& p) {
  check_step_inputs(p.w_r.value(), x.value(), h_prev.value(), "gru_step");
  const ad::Var parts[] = {h_prev, x};
  ad::Var hx = ad::concat_rows(parts);
  ad::Var r = ad::sigmoid(gate(p.w_r, p.b_r, hx));
  ad::Var z = ad::sigmoid(gate(p.w_z, p.b_z, hx));
  const ad::Var reset_parts[] = {ad::mul(r, h_prev), x};
  ad::Var candidate = ad::tanh(gate(p.w, p.b_c, ad::concat_rows(reset_parts)));
  // (1 - z) * h_prev + z * candidate
  ad::Var keep = ad::mul(ad::affine(z, -1.0, 1.0), h_prev);
  return ad::add(keep, ad::mul(z, candidate));
}

ad::Var rnn_step(ad::Var x, ad::Var h_prev, const RnnCell<ad::Var>& p) {
  check_step_inputs(p.w.value(), x.value(), h_prev.value(), "rnn_step");
  const ad::Var parts[] = {h_prev, x};
  return ad::tanh(gate(p.w, p.b, ad::concat_rows(parts)));
}

ad::Var encode_sequence(std::span<const ad::Var> window, const BoundEncoder& stack) {
  if (window.empty()) throw ContractError("encode_sequence: empty window");
  ad::Tape& tape = *window.front().tape;
  const std::size_t batch = window.front().cols();
  for (const ad::Var& x : window) require_rows(x.value(), stack.input_width, "encode_sequence input");

  return std::visit(
      [&](const auto& layers) -> ad::Var {
        using L = std::decay_t<decltype(layers)>;
        if constexpr (std::is_same_v<L, ConvBlock<ad::Var>>) {
          if (window.size() < kConvWidth) {
            throw ContractError("encode_sequence: cnn needs at least " + std::to_string(kConvWidth) +
                                " steps, got " + std::to_string(window.size()));
          }
          const std::size_t positions = window.size() - kConvWidth + 1;
          ad::Var pooled;
          for (std::size_t t = 0; t < positions; ++t) {
            ad::Var feature =
                ad::tanh(ad::add_bias(ad::matmul(layers.kernel, ad::concat_rows(window.subspan(t, kConvWidth))),
                                      layers.bias));
            pooled = t == 0 ? feature : ad::add(pooled, feature);
          }
          pooled = ad::affine(pooled, 1.0 / static_cast<double>(positions), 0.0);
          return ad::add_bias(ad::matmul(layers.dense_w, pooled), layers.dense_b);
        } else {
          std::vector<ad::Var> inputs(window.begin(), window.end());
          for (const auto& cell : layers) {
            ad::Var h = zeros_like_batch(tape, stack.hidden_width, batch);
            ad::Var c = h;
            std::vector<ad::Var> outputs;
            outputs.reserve(inputs.size());
            for (const ad::Var& x : inputs) {
              if constexpr (std::is_same_v<L, std::vector<LstmCell<ad::Var>>>) {
                LstmState s = lstm_step(x, h, c, cell);
                h = s.h;
                c = s.c;
              } else if constexpr (std::is_same_v<L, std::vector<GruCell<ad::Var>>>) {
                h = gru_step(x, h, cell);
              } else {
                h = rnn_step(x, h, cell);
              }
              outputs.push_back(h);
            }
            inputs = std::move(outputs);
          }
          return inputs.back();
        }
      },
      stack.layers);
}

std::pair<Matrix, Matrix> lstm_step(const Matrix& x, const Matrix& h_prev, const Matrix& c_prev,
                                    const LstmCellParams& p) {
  ad::Tape tape;
  LstmState s = lstm_step(tape.constant(x), tape.constant(h_prev), tape.constant(c_prev),
                          bind_block<LstmCell>(tape, p, false));
  return {s.h.value(), s.c.value()};
}

Matrix gru_step(const Matrix& x, const Matrix& h_prev, const GruCellParams& p) {
  ad::Tape tape;
  return gru_step(tape.constant(x), tape.constant(h_prev), bind_block<GruCell>(tape, p, false)).value();
}

Matrix rnn_step(const Matrix& x, const Matrix& h_prev, const RnnCellParams& p) {
  ad::Tape tape;
  return rnn_step(tape.constant(x), tape.constant(h_prev), bind_block<RnnCell>(tape, p, false)).value();
}

Matrix encode_sequence(std::span<const Matrix> window, const EncoderStack& stack) {
  if (window.empty()) throw ContractError("encode_sequence: empty window");
  ad::Tape tape;
  std::vector<ad::Var> inputs;
  inputs.reserve(window.size());
  for (const Matrix& x : window) inputs.push_back(tape.constant(x));
  return encode_sequence(inputs, bind(tape, stack, false)).value();
}

}  // namespace tsen
