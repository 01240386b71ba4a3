#include "tsen/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <omp.h>

#include "tsen/errors.hpp"

namespace tsen {

namespace {

// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelFlops = 1u << 16;

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void require_product_shapes(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
  }
}

// One output row; shared by the serial and parallel kernels so both reduce
// in the same order.
inline void product_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  const double* arow = a.data().data() + i * inner;
  const double* bdata = b.data().data();
  double* crow = c.data().data() + i * n;
  for (std::size_t k = 0; k < inner; ++k) {
    const double aik = arow[k];
    const double* brow = bdata + k * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("Matrix: " + std::to_string(data_.size()) + " values for shape (" +
                     std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

double& Matrix::at(std::size_t r, std::size_t c) {
  if (r >= rows_ || c >= cols_) throw ShapeError("Matrix::at: index out of range for " + shape_string());
  return (*this)(r, c);
}

double Matrix::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) throw ShapeError("Matrix::at: index out of range for " + shape_string());
  return (*this)(r, c);
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << "(" << rows_ << "x" << cols_ << ")";
  return os.str();
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape(*this, other, "sub");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

double sigmoid(double x) noexcept {
  // Split on sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
  require_product_shapes(a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) product_row(a, b, c, i);
  return c;
}

Matrix matmul_parallel(const Matrix& a, const Matrix& b) {
  require_product_shapes(a, b);
  Matrix c(a.rows(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) product_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  const std::size_t flops = a.rows() * a.cols() * b.cols();
  if (flops < kParallelFlops || omp_in_parallel() || omp_get_max_threads() == 1) {
    return matmul_serial(a, b);
  }
  return matmul_parallel(a, b);
}

Matrix apply_nonlinear(const Matrix& m, Activation kind) {
  Matrix out = m;
  switch (kind) {
    case Activation::sigmoid:
      for (double& v : out.data()) v = sigmoid(v);
      break;
    case Activation::tanh:
      for (double& v : out.data()) v = std::tanh(v);
      break;
    case Activation::identity:
      break;
  }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

Matrix concat_rows(std::span<const Matrix> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + parts.front().shape_string() + " vs " +
                       p.shape_string());
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Matrix(rows, cols, std::move(data));
}

double max_abs(const Matrix& m) noexcept {
  double best = 0.0;
  for (double v : m.data()) best = std::max(best, std::abs(v));
  return best;
}

Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("cholesky: non-square " + a.shape_string());
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * (1.0 + std::abs(a(i, j)))) {
        throw NumericError("cholesky: matrix is not symmetric");
      }
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) throw NumericError("cholesky: matrix is not positive definite");
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

double spectral_radius(const Matrix& a, int squarings) {
  if (a.rows() != a.cols()) throw ShapeError("spectral_radius: non-square " + a.shape_string());
  auto frobenius = [](const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return std::sqrt(s);
  };
  double norm = frobenius(a);
  if (norm == 0.0) return 0.0;
  Matrix power = a * (1.0 / norm);
  // log ||A^(2^s)|| accumulated alongside the normalized power.
  double log_norm = std::log(norm);
  double exponent = 1.0;
  double estimate = norm;
  for (int s = 0; s < squarings; ++s) {
    power = matmul_serial(power, power);
    exponent *= 2.0;
    norm = frobenius(power);
    if (norm == 0.0) return 0.0;
    log_norm = 2.0 * log_norm + std::log(norm);
    power *= 1.0 / norm;
    estimate = std::exp(log_norm / exponent);
  }
  return estimate;
}

}  // namespace tsen
