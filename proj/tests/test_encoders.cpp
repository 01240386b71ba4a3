#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "tsen/encoders.hpp"
#include "tsen/errors.hpp"
#include "tsen/grad_check.hpp"

namespace tsen {
namespace {

using testing::random_matrix;
using testing::random_window;

constexpr EncoderKind kAllKinds[] = {EncoderKind::lstm, EncoderKind::gru, EncoderKind::rnn, EncoderKind::cnn};

LstmCellParams zero_lstm(std::size_t in, std::size_t h) {
  Rng rng(0);
  auto stack = init_encoder(EncoderKind::lstm, in, h, 1, rng);
  testing::zero(stack, std::string());
  return std::get<std::vector<LstmCellParams>>(stack.layers).front();
}

GruCellParams zero_gru(std::size_t in, std::size_t h) {
  Rng rng(0);
  auto stack = init_encoder(EncoderKind::gru, in, h, 1, rng);
  testing::zero(stack, std::string());
  return std::get<std::vector<GruCellParams>>(stack.layers).front();
}

TEST(Lstm, ZeroParamsZeroState) {
  const auto [h, c] = lstm_step(Matrix(3, 1, 0.7), Matrix(4, 1), Matrix(4, 1), zero_lstm(3, 4));
  EXPECT_EQ(h, Matrix(4, 1));
  EXPECT_EQ(c, Matrix(4, 1));
}

TEST(Lstm, ZeroParamsHalveCellState) {
  const Matrix c_prev{{1.0}, {-2.0}, {0.3}};
  const auto [h, c] = lstm_step(Matrix{{0.5}, {0.1}}, Matrix(3, 1, 0.9), c_prev, zero_lstm(2, 3));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(c(i, 0), 0.5 * c_prev(i, 0));
    EXPECT_EQ(h(i, 0), 0.5 * std::tanh(0.5 * c_prev(i, 0)));
  }
}

TEST(Lstm, HiddenStateBounded) {
  Rng rng(1);
  auto stack = init_encoder(EncoderKind::lstm, 3, 5, 1, rng);
  testing::randomize(stack, rng, -4.0, 4.0, std::string());
  const auto& cell = std::get<std::vector<LstmCellParams>>(stack.layers).front();
  Matrix h(5, 1), c(5, 1);
  for (int t = 0; t < 20; ++t) {
    std::tie(h, c) = lstm_step(random_matrix(3, 1, rng, -5, 5), h, c, cell);
    for (double v : h.data()) EXPECT_LT(std::abs(v), 1.0);
  }
}

TEST(Lstm, ShapeMismatchIsAShapeError) {
  EXPECT_THROW(lstm_step(Matrix(2, 1), Matrix(4, 1), Matrix(4, 1), zero_lstm(3, 4)), ShapeError);
}

TEST(Gru, ZeroParams) {
  EXPECT_EQ(gru_step(Matrix(2, 1, 1.0), Matrix(3, 1), zero_gru(2, 3)), Matrix(3, 1));
  const Matrix h_prev{{0.8}, {-0.4}, {2.0}};
  const Matrix h = gru_step(Matrix(2, 1, 1.0), h_prev, zero_gru(2, 3));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(h(i, 0), 0.5 * h_prev(i, 0));
}

TEST(Gru, OutputIsConvexCombinationOfPreviousAndCandidate) {
  Rng rng(2);
  auto stack = init_encoder(EncoderKind::gru, 2, 4, 1, rng);
  testing::randomize(stack, rng, -2.0, 2.0, std::string());
  const auto& p = std::get<std::vector<GruCellParams>>(stack.layers).front();
  const Matrix x = random_matrix(2, 1, rng);
  const Matrix h_prev = random_matrix(4, 1, rng);
  const Matrix r = apply_nonlinear(matmul(p.w_r, concat_rows(std::vector{h_prev, x})) + p.b_r, Activation::sigmoid);
  const Matrix cand = apply_nonlinear(matmul(p.w, concat_rows(std::vector{hadamard(r, h_prev), x})) + p.b_c,
                                      Activation::tanh);
  const Matrix h = gru_step(x, h_prev, p);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GE(h(i, 0), std::min(h_prev(i, 0), cand(i, 0)) - 1e-15);
    EXPECT_LE(h(i, 0), std::max(h_prev(i, 0), cand(i, 0)) + 1e-15);
  }
}

TEST(Rnn, ClosedForms) {
  Rng rng(3);
  auto stack = init_encoder(EncoderKind::rnn, 2, 3, 1, rng);
  testing::zero(stack, std::string());
  auto& p = std::get<std::vector<RnnCellParams>>(stack.layers).front();
  EXPECT_EQ(rnn_step(Matrix(2, 1, 3.0), Matrix(3, 1), p), Matrix(3, 1));
  p.b = Matrix(3, 1, std::atanh(0.5));
  const Matrix h = rnn_step(Matrix(2, 1, 3.0), Matrix(3, 1, 0.2), p);
  for (double v : h.data()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(Encoder, LengthOneWindowIsOneCellStep) {
  Rng rng(4);
  const auto stack = init_encoder(EncoderKind::gru, 3, 5, 1, rng);
  const Matrix x = random_matrix(3, 1, rng);
  const Matrix step = gru_step(x, Matrix(5, 1), std::get<std::vector<GruCellParams>>(stack.layers).front());
  EXPECT_EQ(encode_sequence(std::vector{x}, stack), step);
}

TEST(Encoder, ZeroParamsEncodeToZero) {
  Rng rng(5);
  for (EncoderKind kind : kAllKinds) {
    auto stack = init_encoder(kind, 3, 4, 2, rng);
    testing::zero(stack, std::string());
    EXPECT_EQ(encode_sequence(random_window(6, 3, 1, rng), stack), Matrix(4, 1)) << to_string(kind);
  }
}

TEST(Encoder, OrderSensitive) {
  Rng rng(6);
  for (EncoderKind kind : kAllKinds) {
    const auto stack = init_encoder(kind, 3, 4, 2, rng);
    auto window = random_window(5, 3, 1, rng);
    const Matrix forward = encode_sequence(window, stack);
    std::reverse(window.begin(), window.end());
    EXPECT_NE(forward, encode_sequence(window, stack)) << to_string(kind);
  }
}

TEST(Encoder, DeterministicAndBounded) {
  Rng rng(7);
  for (EncoderKind kind : {EncoderKind::lstm, EncoderKind::gru, EncoderKind::rnn}) {
    const auto stack = init_encoder(kind, 2, 6, 2, rng);
    const auto window = random_window(6, 2, 3, rng);
    const Matrix a = encode_sequence(window, stack);
    EXPECT_EQ(a, encode_sequence(window, stack));
    for (double v : a.data()) EXPECT_LT(std::abs(v), 1.0);
  }
}

TEST(Encoder, BatchColumnsAreIndependent) {
  Rng rng(8);
  for (EncoderKind kind : kAllKinds) {
    const auto stack = init_encoder(kind, 2, 4, 2, rng);
    const auto window = random_window(5, 2, 3, rng);
    const Matrix batched = encode_sequence(window, stack);
    for (std::size_t b = 0; b < 3; ++b) {
      std::vector<Matrix> single;
      for (const Matrix& x : window) single.push_back(Matrix::column(std::vector{x(0, b), x(1, b)}));
      const Matrix one = encode_sequence(single, stack);
      for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(batched(i, b), one(i, 0), 1e-15);
    }
  }
}

TEST(Encoder, EmptyWindowIsAContractError) {
  Rng rng(9);
  for (EncoderKind kind : kAllKinds) {
    EXPECT_THROW(encode_sequence(std::vector<Matrix>{}, init_encoder(kind, 2, 3, 1, rng)), ContractError);
  }
}

TEST(Encoder, CnnNeedsThreeSteps) {
  Rng rng(10);
  const auto stack = init_encoder(EncoderKind::cnn, 2, 3, 1, rng);
  EXPECT_THROW(encode_sequence(random_window(2, 2, 1, rng), stack), ContractError);
  EXPECT_NO_THROW(encode_sequence(random_window(3, 2, 1, rng), stack));
}

TEST(Encoder, WrongStepWidthIsAShapeError) {
  Rng rng(11);
  const auto stack = init_encoder(EncoderKind::lstm, 3, 4, 2, rng);
  EXPECT_THROW(encode_sequence(random_window(4, 2, 1, rng), stack), ShapeError);
}

TEST(Encoder, ParameterCountMatchesClosedForm) {
  Rng rng(12);
  for (EncoderKind kind : kAllKinds) {
    for (std::size_t depth : {1u, 2u, 3u}) {
      auto stack = init_encoder(kind, 6, 16, depth, rng);
      std::size_t n = 0;
      for_each_param(stack, std::string(), [&](const std::string&, Matrix& m) { n += m.size(); });
      EXPECT_EQ(n, encoder_parameter_count(kind, 6, 16, depth)) << to_string(kind) << " depth " << depth;
    }
  }
  // 4 gates x (16 x 22 + 16) + 4 x (16 x 32 + 16)
  EXPECT_EQ(encoder_parameter_count(EncoderKind::lstm, 6, 16, 2), 4u * (16 * 22 + 16) + 4u * (16 * 32 + 16));
}

TEST(Encoder, GlorotInitIsBoundedAndBiasesZero) {
  Rng rng(13);
  auto stack = init_encoder(EncoderKind::lstm, 6, 16, 2, rng);
  for_each_param(stack, std::string(), [&](const std::string& name, Matrix& m) {
    if (name.find(".b_") != std::string::npos) {
      EXPECT_EQ(m, Matrix(m.rows(), m.cols())) << name;
    } else {
      const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      EXPECT_LE(max_abs(m), a) << name;
      EXPECT_GT(max_abs(m), 0.0) << name;
    }
  });
}

TEST(Encoder, ParseKind) {
  EXPECT_EQ(parse_encoder_kind("gru"), EncoderKind::gru);
  EXPECT_THROW(parse_encoder_kind("transformer"), UsageError);
}

class EncoderGradient : public ::testing::TestWithParam<std::tuple<EncoderKind, int>> {};

TEST_P(EncoderGradient, MatchesFiniteDifferences) {
  const auto [kind, seed] = GetParam();
  Rng rng(static_cast<std::uint64_t>(seed));
  auto stack = init_encoder(kind, 3, 5, 2, rng);
  testing::randomize(stack, rng, -0.8, 0.8, std::string());
  const auto window = random_window(6, 3, 2, rng);
  const Matrix r = random_matrix(5, 2, rng);
  const ad::ScalarFunction f = [&](ad::Tape& tape, std::span<const ad::Var> p) {
    const auto bound = testing::rebind(tape, stack, p, std::string());
    return testing::probe(encode_sequence(testing::constants(tape, window), bound), r);
  };
  EXPECT_LE(ad::grad_check(f, testing::flatten(stack, std::string())), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, EncoderGradient,
                         ::testing::Combine(::testing::ValuesIn(kAllKinds), ::testing::Range(1, 6)),
                         testing::kind_and_seed);

}  // namespace
}  // namespace tsen
