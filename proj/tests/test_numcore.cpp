#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "support.hpp"
#include "tsen/adam.hpp"
#include "tsen/errors.hpp"
#include "tsen/grad_check.hpp"
#include "tsen/matrix.hpp"
#include "tsen/tape.hpp"

namespace tsen {
namespace {

using testing::random_matrix;

TEST(Matrix, IdentityTimesMIsM) {
  Rng rng(1);
  const Matrix m = random_matrix(2, 2, rng);
  EXPECT_EQ(matmul(Matrix::identity(2), m), m);
}

TEST(Matrix, HandProduct) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{1}, {1}};
  EXPECT_EQ(matmul(a, b), (Matrix{{3}, {7}}));
}

TEST(Matrix, ShapeMismatchNamesBothShapes) {
  const Matrix a(2, 3);
  const Matrix b(2, 2);
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x2"), std::string::npos) << msg;
  }
}

TEST(Matrix, ConstructorRejectsWrongDataLength) { EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError); }

TEST(Matrix, SerialAndParallelProductsAreBitIdentical) {
  Rng rng(2);
  for (auto [n, k, m] : {std::tuple{3, 4, 5}, {64, 70, 33}, {128, 128, 128}}) {
    const Matrix a = random_matrix(n, k, rng);
    const Matrix b = random_matrix(k, m, rng);
    EXPECT_EQ(matmul_serial(a, b), matmul_parallel(a, b));
    EXPECT_EQ(matmul(a, b), matmul_serial(a, b));
  }
}

TEST(Matrix, ProductMatchesEigen) {
  Rng rng(3);
  const Matrix a = random_matrix(7, 5, rng);
  const Matrix b = random_matrix(5, 4, rng);
  Eigen::MatrixXd ea(7, 5), eb(5, 4);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 5; ++j) ea(i, j) = a(i, j);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) eb(i, j) = b(i, j);
  const Eigen::MatrixXd ec = ea * eb;
  const Matrix c = matmul(a, b);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(c(i, j), ec(i, j), 1e-13);
}

TEST(Matrix, Nonlinearities) {
  EXPECT_EQ(apply_nonlinear(Matrix{{0}}, Activation::sigmoid)(0, 0), 0.5);
  EXPECT_EQ(apply_nonlinear(Matrix{{0}}, Activation::tanh)(0, 0), 0.0);
  EXPECT_EQ(apply_nonlinear(Matrix{{2, -3}}, Activation::identity), (Matrix{{2, -3}}));
  EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
  EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(Matrix, CholeskyReconstructsAndRejectsIndefinite) {
  const Matrix s{{4, 2}, {2, 3}};
  const Matrix l = cholesky(s);
  EXPECT_EQ(l(0, 1), 0.0);
  const Matrix back = matmul(l, l.transposed());
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(back(i, j), s(i, j), 1e-14);
  EXPECT_THROW(cholesky(Matrix{{1, 2}, {2, 1}}), NumericError);
  EXPECT_THROW(cholesky(Matrix{{1, 0.5}, {0.2, 1}}), NumericError);
}

TEST(Matrix, SpectralRadiusMatchesEigenvalues) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 7;
    const Matrix a = random_matrix(n, n, rng);
    Eigen::MatrixXd e(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) e(i, j) = a(i, j);
    const double expected = e.eigenvalues().cwiseAbs().maxCoeff();
    EXPECT_NEAR(spectral_radius(a), expected, 1e-9 * std::max(1.0, expected));
  }
  EXPECT_EQ(spectral_radius(Matrix(3, 3)), 0.0);
}

TEST(Tape, SquareGradient) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Matrix{{3}});
  const auto g = tape.backward(ad::mul(x, x));
  EXPECT_EQ(g.at(0)(0, 0), 6.0);
}

TEST(Tape, SigmoidGradientAtZero) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Matrix{{0}});
  EXPECT_EQ(tape.backward(ad::sigmoid(x)).at(0)(0, 0), 0.25);
}

TEST(Tape, NonScalarLossIsRejected) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Matrix(2, 1, 1.0));
  EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Tape, DisconnectedLeafGetsExactZero) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Matrix{{2}});
  const ad::Var unused = tape.leaf(Matrix{{5, 6}});
  const auto g = tape.backward(ad::tanh(x));
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[1], Matrix(1, 2));
  EXPECT_EQ(tape.gradient(unused), Matrix(1, 2));
}

TEST(Tape, BackwardVisitsEachNodeOnce) {
  ad::Tape tape;
  const ad::Var x = tape.leaf(Matrix{{0.3}});
  const ad::Var y = ad::mul(x, x);
  const ad::Var z = ad::add(y, ad::tanh(y));
  tape.backward(z);
  // Every node but the leaf has a backward step.
  EXPECT_EQ(tape.visited_in_last_backward(), tape.size() - 1);
}

TEST(Tape, BackwardOfSumIsSumOfBackwards) {
  Rng rng(5);
  const Matrix w0 = random_matrix(3, 3, rng);
  const Matrix x0 = random_matrix(3, 2, rng);
  auto grads = [&](int which) {
    ad::Tape tape;
    const ad::Var w = tape.leaf(w0);
    const ad::Var x = tape.constant(x0);
    const ad::Var a = ad::sum_all(ad::tanh(ad::matmul(w, x)));
    const ad::Var b = ad::sum_all(ad::sigmoid(ad::matmul(w, ad::affine(x, 2.0, 1.0))));
    const ad::Var loss = which == 0 ? a : which == 1 ? b : ad::add(a, b);
    return tape.backward(loss).at(0);
  };
  const Matrix sum = grads(0) + grads(1);
  const Matrix joint = grads(2);
  for (std::size_t i = 0; i < sum.size(); ++i) EXPECT_NEAR(sum.data()[i], joint.data()[i], 1e-14);
}

TEST(GradCheck, RandomThreeOpChain) {
  Rng rng(6);
  const std::vector<Matrix> params{random_matrix(3, 3, rng), random_matrix(3, 2, rng)};
  const Matrix r = random_matrix(3, 2, rng);
  const ad::ScalarFunction f = [&](ad::Tape&, std::span<const ad::Var> p) {
    return testing::probe(ad::tanh(ad::add(ad::matmul(p[0], p[1]), p[1].tape->constant(r))), r);
  };
  EXPECT_LT(ad::grad_check(f, params), 1e-6);
}

TEST(GradCheck, LinearFunctionIsExact) {
  Rng rng(7);
  const std::vector<Matrix> params{random_matrix(2, 3, rng)};
  const Matrix r = random_matrix(2, 3, rng);
  const ad::ScalarFunction f = [&](ad::Tape&, std::span<const ad::Var> p) { return testing::probe(p[0], r); };
  EXPECT_LT(ad::grad_check(f, params), 1e-9);
}

TEST(GradCheck, EveryPrimitive) {
  Rng rng(8);
  const std::vector<Matrix> params{random_matrix(4, 3, rng), random_matrix(4, 3, rng), random_matrix(4, 1, rng),
                                   random_matrix(1, 3, rng)};
  const Matrix r = random_matrix(4, 3, rng);
  const ad::ScalarFunction f = [&](ad::Tape&, std::span<const ad::Var> p) {
    const ad::Var a = ad::add_bias(ad::mul(p[0], p[1]), p[2]);
    const ad::Var b = ad::sub(ad::sigmoid(a), ad::affine(p[1], 0.5, -0.2));
    const ad::Var parts[] = {ad::slice_rows(b, 0, 2), ad::slice_rows(ad::softmax_cols(b), 2, 2)};
    const ad::Var c = ad::scale_cols(ad::concat_rows(parts), p[3]);
    const ad::Var d = ad::col_dot(c, ad::activate(p[0], Activation::tanh));
    return ad::add(testing::probe(c, r), ad::sum_all(d));
  };
  EXPECT_LT(ad::grad_check(f, params), 1e-6);
}

TEST(GradCheck, NonPositiveEpsIsAContractError) {
  const std::vector<Matrix> params{Matrix{{1}}};
  const ad::ScalarFunction f = [](ad::Tape&, std::span<const ad::Var> p) { return ad::mul(p[0], p[0]); };
  EXPECT_THROW(ad::grad_check(f, params, 0.0), ContractError);
}

TEST(GradCheck, NonFiniteFunctionIsANumericError) {
  const std::vector<Matrix> params{Matrix{{1}}};
  const ad::ScalarFunction f = [](ad::Tape& tape, std::span<const ad::Var> p) {
    return ad::mul(p[0], tape.constant(Matrix{{std::numeric_limits<double>::infinity()}}));
  };
  EXPECT_THROW(ad::grad_check(f, params), NumericError);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Matrix p{{1.5, -2}};
  Matrix* slots[] = {&p};
  const Matrix g[] = {Matrix(1, 2)};
  AdamState state;
  adam_step(slots, g, state, {});
  EXPECT_EQ(p, (Matrix{{1.5, -2}}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesAboutLearningRate) {
  Matrix p{{0, 0, 0}};
  Matrix* slots[] = {&p};
  const Matrix g[] = {Matrix{{3, -0.2, 1e-3}}};
  AdamState state;
  AdamConfig cfg;
  adam_step(slots, g, state, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    const double gi = g[0].data()[i];
    EXPECT_NEAR(p.data()[i], -cfg.learning_rate * gi / (std::abs(gi) + cfg.epsilon), 1e-15);
  }
}

TEST(Adam, MinimizesScalarQuadratic) {
  Matrix theta{{0}};
  Matrix* slots[] = {&theta};
  AdamState state;
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  for (int i = 0; i < 2000; ++i) {
    const Matrix g[] = {Matrix{{2 * (theta(0, 0) - 2)}}};
    adam_step(slots, g, state, cfg);
  }
  EXPECT_LT(std::abs(theta(0, 0) - 2), 1e-3);
}

TEST(Adam, NanGradientNamesTheParameter) {
  Matrix p{{1}};
  Matrix* slots[] = {&p};
  const Matrix g[] = {Matrix{{std::nan("")}}};
  const std::string names[] = {"member0.head.w_o"};
  AdamState state;
  try {
    adam_step(slots, g, state, {}, names);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("member0.head.w_o"), std::string::npos);
  }
}

TEST(Adam, RejectsNonPositiveLearningRateAndShapeMismatch) {
  Matrix p{{1}};
  Matrix* slots[] = {&p};
  AdamState state;
  const Matrix g[] = {Matrix{{1}}};
  AdamConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(adam_step(slots, g, state, bad), ContractError);
  const Matrix wrong[] = {Matrix(2, 1)};
  EXPECT_THROW(adam_step(slots, wrong, state, {}), ShapeError);
}

TEST(Rng, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {0}), derive_seed(2, {0}));
}

}  // namespace
}  // namespace tsen
