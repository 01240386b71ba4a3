#include "tsen/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tsen/errors.hpp"

namespace tsen::ad {

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::leaf(Matrix value) {
  nodes_.push_back({std::move(value), nullptr});
  trainable_.push_back(nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), nullptr});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, Backprop backprop) {
  nodes_.push_back({std::move(value), std::move(backprop)});
  return {this, nodes_.size() - 1};
}

Matrix& Tape::grad_slot(std::size_t id) {
  Matrix& g = grads_[id];
  if (g.empty() && !nodes_[id].value.empty()) g = Matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
  return g;
}

std::vector<Matrix> Tape::backward(Var loss) {
  if (loss.tape != this || loss.id >= nodes_.size()) throw ContractError("backward: loss is not on this tape");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  grads_.assign(nodes_.size(), Matrix());
  grads_[loss.id] = Matrix(1, 1, 1.0);
  visited_ = 0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (grads_[i].empty() || !nodes_[i].backprop) continue;
    ++visited_;
    // Slots of operands always have smaller ids, so grads_[i] is final here.
    const Matrix grad_out = std::move(grads_[i]);
    nodes_[i].backprop(*this, grad_out);
    grads_[i] = grad_out;
  }
  std::vector<Matrix> out;
  out.reserve(trainable_.size());
  for (std::size_t id : trainable_) {
    const Matrix& g = grads_[id];
    out.push_back(g.empty() ? Matrix(nodes_[id].value.rows(), nodes_[id].value.cols()) : g);
  }
  return out;
}

Matrix Tape::gradient(Var v) const {
  if (v.id < grads_.size() && !grads_[v.id].empty()) return grads_[v.id];
  return Matrix(nodes_[v.id].value.rows(), nodes_[v.id].value.cols());
}

namespace {

Tape* same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ContractError("operands live on different tapes");
  return a.tape;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape* t = same_tape(a, b);
  Matrix out = tsen::matmul(a.value(), b.value());
  return t->record(std::move(out), [a, b](Tape& tape, const Matrix& g) {
    tape.grad_slot(a.id) += tsen::matmul(g, b.value().transposed());
    tape.grad_slot(b.id) += tsen::matmul(a.value().transposed(), g);
  });
}

Var add(Var a, Var b) {
  Tape* t = same_tape(a, b);
  return t->record(a.value() + b.value(), [a, b](Tape& tape, const Matrix& g) {
    tape.grad_slot(a.id) += g;
    tape.grad_slot(b.id) += g;
  });
}

Var sub(Var a, Var b) {
  Tape* t = same_tape(a, b);
  return t->record(a.value() - b.value(), [a, b](Tape& tape, const Matrix& g) {
    tape.grad_slot(a.id) += g;
    tape.grad_slot(b.id) -= g;
  });
}

Var mul(Var a, Var b) {
  Tape* t = same_tape(a, b);
  return t->record(hadamard(a.value(), b.value()), [a, b](Tape& tape, const Matrix& g) {
    tape.grad_slot(a.id) += hadamard(g, b.value());
    tape.grad_slot(b.id) += hadamard(g, a.value());
  });
}

Var add_bias(Var m, Var b) {
  Tape* t = same_tape(m, b);
  const Matrix& mv = m.value();
  const Matrix& bv = b.value();
  if (bv.cols() != 1 || bv.rows() != mv.rows()) {
    throw ShapeError("add_bias: bias " + bv.shape_string() + " does not fit " + mv.shape_string());
  }
  Matrix out = mv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv(i, 0);
  return t->record(std::move(out), [m, b](Tape& tape, const Matrix& g) {
    tape.grad_slot(m.id) += g;
    Matrix& gb = tape.grad_slot(b.id);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j);
      gb(i, 0) += s;
    }
  });
}

Var sigmoid(Var x) {
  Matrix y = apply_nonlinear(x.value(), Activation::sigmoid);
  const std::size_t out_id = x.tape->size();
  return x.tape->record(std::move(y), [x, out_id](Tape& tape, const Matrix& g) {
    const Matrix& yv = tape.value(Var{&tape, out_id});
    Matrix& gx = tape.grad_slot(x.id);
    auto gd = g.data();
    auto yd = yv.data();
    auto out = gx.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += gd[i] * yd[i] * (1.0 - yd[i]);
  });
}

Var tanh(Var x) {
  Matrix y = apply_nonlinear(x.value(), Activation::tanh);
  const std::size_t out_id = x.tape->size();
  return x.tape->record(std::move(y), [x, out_id](Tape& tape, const Matrix& g) {
    const Matrix& yv = tape.value(Var{&tape, out_id});
    Matrix& gx = tape.grad_slot(x.id);
    auto gd = g.data();
    auto yd = yv.data();
    auto out = gx.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += gd[i] * (1.0 - yd[i] * yd[i]);
  });
}

Var activate(Var x, Activation kind) {
  switch (kind) {
    case Activation::sigmoid:
      return sigmoid(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::identity:
      break;
  }
  return x;
}

Var affine(Var x, double scale, double shift) {
  Matrix y = x.value();
  for (double& v : y.data()) v = scale * v + shift;
  return x.tape->record(std::move(y), [x, scale](Tape& tape, const Matrix& g) {
    Matrix& gx = tape.grad_slot(x.id);
    auto gd = g.data();
    auto out = gx.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * gd[i];
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  Tape* t = parts.front().tape;
  std::vector<Matrix> values;
  values.reserve(parts.size());
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    values.push_back(p.value());
  }
  Matrix out = tsen::concat_rows(values);
  std::vector<Var> operands(parts.begin(), parts.end());
  return t->record(std::move(out), [operands = std::move(operands)](Tape& tape, const Matrix& g) {
    std::size_t offset = 0;
    for (const Var& p : operands) {
      Matrix& gp = tape.grad_slot(p.id);
      const std::size_t n = gp.size();
      auto src = g.data().subspan(offset, n);
      auto dst = gp.data();
      for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
      offset += n;
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const Matrix& xv = x.value();
  if (begin + count > xv.rows() || count == 0) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + xv.shape_string());
  }
  const std::size_t cols = xv.cols();
  auto src = xv.data().subspan(begin * cols, count * cols);
  Matrix out(count, cols, std::vector<double>(src.begin(), src.end()));
  return x.tape->record(std::move(out), [x, begin, cols](Tape& tape, const Matrix& g) {
    auto dst = tape.grad_slot(x.id).data().subspan(begin * cols, g.size());
    auto gd = g.data();
    for (std::size_t i = 0; i < gd.size(); ++i) dst[i] += gd[i];
  });
}

Var softmax_cols(Var x) {
  const Matrix& xv = x.value();
  if (xv.rows() == 0) throw ContractError("softmax_cols: empty input");
  Matrix y(xv.rows(), xv.cols());
  for (std::size_t j = 0; j < xv.cols(); ++j) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xv.rows(); ++i) top = std::max(top, xv(i, j));
    double total = 0.0;
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      y(i, j) = std::exp(xv(i, j) - top);
      total += y(i, j);
    }
    for (std::size_t i = 0; i < xv.rows(); ++i) y(i, j) /= total;
  }
  const std::size_t out_id = x.tape->size();
  return x.tape->record(std::move(y), [x, out_id](Tape& tape, const Matrix& g) {
    const Matrix& yv = tape.value(Var{&tape, out_id});
    Matrix& gx = tape.grad_slot(x.id);
    for (std::size_t j = 0; j < yv.cols(); ++j) {
      double inner = 0.0;
      for (std::size_t i = 0; i < yv.rows(); ++i) inner += g(i, j) * yv(i, j);
      for (std::size_t i = 0; i < yv.rows(); ++i) gx(i, j) += yv(i, j) * (g(i, j) - inner);
    }
  });
}

Var col_dot(Var a, Var b) {
  Tape* t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(av, bv, "col_dot");
  Matrix out(1, av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) += av(i, j) * bv(i, j);
  return t->record(std::move(out), [a, b](Tape& tape, const Matrix& g) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    Matrix& ga = tape.grad_slot(a.id);
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) ga(i, j) += g(0, j) * bv(i, j);
    Matrix& gb = tape.grad_slot(b.id);
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < av.cols(); ++j) gb(i, j) += g(0, j) * av(i, j);
  });
}

Var scale_cols(Var m, Var w) {
  Tape* t = same_tape(m, w);
  const Matrix& mv = m.value();
  const Matrix& wv = w.value();
  if (wv.rows() != 1 || wv.cols() != mv.cols()) {
    throw ShapeError("scale_cols: weights " + wv.shape_string() + " do not fit " + mv.shape_string());
  }
  Matrix out = mv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= wv(0, j);
  return t->record(std::move(out), [m, w](Tape& tape, const Matrix& g) {
    const Matrix& mv = m.value();
    const Matrix& wv = w.value();
    Matrix& gm = tape.grad_slot(m.id);
    for (std::size_t i = 0; i < mv.rows(); ++i)
      for (std::size_t j = 0; j < mv.cols(); ++j) gm(i, j) += g(i, j) * wv(0, j);
    Matrix& gw = tape.grad_slot(w.id);
    for (std::size_t i = 0; i < mv.rows(); ++i)
      for (std::size_t j = 0; j < mv.cols(); ++j) gw(0, j) += g(i, j) * mv(i, j);
  });
}

Var sum_all(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape->record(Matrix(1, 1, s), [x](Tape& tape, const Matrix& g) {
    for (double& v : tape.grad_slot(x.id).data()) v += g(0, 0);
  });
}

}  // namespace tsen::ad
