#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace eidgm {

/// Row-major dense matrix of doubles. A scalar is a 1x1 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix column(std::span<const double> values);
  static Matrix row_vector(std::span<const double> values);

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  double item() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// n evenly spaced points from a to b inclusive; {a} when n == 1.
std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace eidgm
