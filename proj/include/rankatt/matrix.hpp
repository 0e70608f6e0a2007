#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rankatt {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Rows hold per-segment feature vectors,
/// layer weights (out x in) and attention matrices (K x T).
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const;

  bool operator==(const Matrix& other) const = default;
};

/// Y = X * W^T, with X (n x in) and W (out x in); both row-major so the
/// inner products run over contiguous memory.
Matrix matmul_nt(const Matrix& x, const Matrix& w);

double dot(std::span<const double> a, std::span<const double> b);

/// y += c * x
void axpy(double c, std::span<const double> x, std::span<double> y);

}  // namespace rankatt
