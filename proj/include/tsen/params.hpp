#pragma once

#include <cstddef>
#include <string>
#include <tuple>
#include <utility>

#include "tsen/matrix.hpp"
#include "tsen/rng.hpp"
#include "tsen/tape.hpp"

namespace tsen {

// Leaf parameter blocks are class templates over the element type: Matrix
// for stored weights, ad::Var for weights bound to a tape. Each exposes
// `members()` (a std::tie of its fields) and a parallel static `names`.

template <class Block, class F>
void for_each_member(Block& block, F&& f) {
  auto refs = block.members();
  [&]<std::size_t... I>(std::index_sequence<I...>) {
    (f(std::string(Block::names[I]), std::get<I>(refs)), ...);
  }(std::make_index_sequence<std::tuple_size_v<decltype(refs)>>{});
}

template <template <class> class Block, class To, class From, class F>
Block<To> map_members(const Block<From>& src, F&& f) {
  Block<To> dst;
  auto in = src.members();
  auto out = dst.members();
  [&]<std::size_t... I>(std::index_sequence<I...>) {
    ((std::get<I>(out) = f(std::get<I>(in))), ...);
  }(std::make_index_sequence<std::tuple_size_v<decltype(in)>>{});
  return dst;
}

/// Registers every matrix of a block on `tape`, as trainable leaves or
/// constants.
template <template <class> class Block>
Block<ad::Var> bind_block(ad::Tape& tape, const Block<Matrix>& block, bool trainable) {
  return map_members<Block, ad::Var>(block, [&](const Matrix& m) {
    return trainable ? tape.leaf(m) : tape.constant(m);
  });
}

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)); fan_in = cols.
Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace tsen
