#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tsen {

/// Dense row-major matrix of doubles. Columns double as the batch axis
/// throughout the model code: a (width x batch) matrix holds one column per
/// sample.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix column(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;
  std::string shape_string() const;

  Matrix transposed() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s) noexcept;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

enum class Activation { sigmoid, tanh, identity };

double sigmoid(double x) noexcept;

/// C = A * B. Large products split rows across OpenMP threads; the result is
/// bit-identical to matmul_serial because every output entry is reduced in
/// the same order.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Single-threaded reference product.
Matrix matmul_serial(const Matrix& a, const Matrix& b);

/// Row-parallel product, always taking the OpenMP path.
Matrix matmul_parallel(const Matrix& a, const Matrix& b);

Matrix apply_nonlinear(const Matrix& m, Activation kind);

/// Elementwise product.
Matrix hadamard(const Matrix& a, const Matrix& b);

/// Vertical concatenation of matrices with equal column counts.
Matrix concat_rows(std::span<const Matrix> parts);

double max_abs(const Matrix& m) noexcept;

/// Lower-triangular L with L * L^T = a. Throws NumericError when `a` is not
/// symmetric positive definite.
Matrix cholesky(const Matrix& a);

/// Spectral radius by repeated squaring: rho(A) = lim ||A^n||^(1/n). Every
/// intermediate value is an upper bound on the true radius.
double spectral_radius(const Matrix& a, int squarings = 40);

}  // namespace tsen
