#pragma once

#include <span>
#include <string>
#include <vector>

#include "tsen/model.hpp"
#include "tsen/rng.hpp"

namespace tsen::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = uniform(rng, lo, hi);
  return m;
}

inline std::vector<Matrix> random_window(std::size_t steps, std::size_t width, std::size_t batch, Rng& rng) {
  std::vector<Matrix> w;
  for (std::size_t t = 0; t < steps; ++t) w.push_back(random_matrix(width, batch, rng));
  return w;
}

/// Overwrites every parameter (biases included) with U(lo, hi) draws.
template <class P, class... Prefix>
void randomize(P& params, Rng& rng, double lo, double hi, const Prefix&... prefix) {
  for_each_param(params, prefix..., [&](const std::string&, Matrix& m) {
    for (double& v : m.data()) v = uniform(rng, lo, hi);
  });
}

template <class P, class... Prefix>
std::vector<Matrix> flatten(P params, const Prefix&... prefix) {
  std::vector<Matrix> out;
  for_each_param(params, prefix..., [&](const std::string&, Matrix& m) { out.push_back(m); });
  return out;
}

template <class P, class... Prefix>
void zero(P& params, const Prefix&... prefix) {
  for_each_param(params, prefix..., [&](const std::string&, Matrix& m) { m = Matrix(m.rows(), m.cols()); });
}

/// Binds `params` as constants, then swaps in `vars` (in for_each_param
/// order) so a grad-check function can differentiate through them.
template <class P, class... Prefix>
auto rebind(ad::Tape& tape, const P& params, std::span<const ad::Var> vars, const Prefix&... prefix) {
  auto bound = bind(tape, params, false);
  std::size_t i = 0;
  for_each_param(bound, prefix..., [&](const std::string&, ad::Var& v) { v = vars[i++]; });
  return bound;
}

inline std::vector<ad::Var> constants(ad::Tape& tape, std::span<const Matrix> xs) {
  std::vector<ad::Var> out;
  for (const Matrix& x : xs) out.push_back(tape.constant(x));
  return out;
}

/// Test-name suffix for (kind, seed) parameters, e.g. "gru_seed3".
struct KindAndSeed {
  template <class Info>
  std::string operator()(const Info& info) const {
    return std::string(to_string(std::get<0>(info.param))) + "_seed" + std::to_string(std::get<1>(info.param));
  }
};
inline constexpr KindAndSeed kind_and_seed{};

/// sum(x .* r): a scalar whose gradient w.r.t. x is the fixed random r.
inline ad::Var probe(ad::Var x, const Matrix& r) { return ad::sum_all(ad::mul(x, x.tape->constant(r))); }

}  // namespace tsen::testing
