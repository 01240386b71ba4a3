#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "tsen/matrix.hpp"

namespace tsen::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Records primitive operations in execution order so reverse-mode
/// differentiation can replay them backwards. Single-owner: never share one
/// tape across threads.
class Tape {
 public:
  /// Propagates the node's output gradient into its operands' slots.
  using Backprop = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a trainable leaf. backward() reports its gradient.
  Var leaf(Matrix value);
  /// Registers a non-trainable input.
  Var constant(Matrix value);
  /// Used by primitive ops: records an output computed from `parents`.
  Var record(Matrix value, Backprop backprop);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t trainable_count() const noexcept { return trainable_.size(); }

  /// Reverse sweep from a 1x1 loss node. Returns d(loss)/d(leaf) for every
  /// trainable leaf in registration order; leaves off every path to the loss
  /// get exact zeros. Throws ContractError for a non-scalar loss.
  std::vector<Matrix> backward(Var loss);

  /// Gradient of any node from the last backward(); zeros if unreached.
  Matrix gradient(Var v) const;

  /// Number of nodes whose backprop ran in the last backward().
  std::size_t visited_in_last_backward() const noexcept { return visited_; }

  /// Gradient slot of a node, zero-initialized on first access. Only valid
  /// while backward() runs.
  Matrix& grad_slot(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Backprop backprop;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> trainable_;
  std::vector<Matrix> grads_;
  std::size_t visited_ = 0;
};

// Primitive differentiable operations. Columns are the batch axis.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// m (r x n) plus a bias column b (r x 1) broadcast over every column.
Var add_bias(Var m, Var b);
Var sigmoid(Var x);
Var tanh(Var x);
Var activate(Var x, Activation kind);
/// scale * x + shift, elementwise.
Var affine(Var x, double scale, double shift);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
/// Numerically stable softmax down each column.
Var softmax_cols(Var x);
/// Per-column dot products of equally shaped a and b: a (r x n) -> (1 x n).
Var col_dot(Var a, Var b);
/// m (r x n) with column c scaled by w(0, c); w is (1 x n).
Var scale_cols(Var m, Var w);
/// Sum of all entries, as a 1x1 node.
Var sum_all(Var x);

}  // namespace tsen::ad
