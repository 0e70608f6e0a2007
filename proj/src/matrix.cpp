#include "rankatt/matrix.hpp"

#include <cmath>

#include "rankatt/errors.hpp"

namespace rankatt {

bool Matrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix matmul_nt(const Matrix& x, const Matrix& w) {
  if (x.cols != w.cols) {
    throw ShapeError("matmul_nt: inner dimensions disagree");
  }
  Matrix y(x.rows, w.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.data.data() + i * x.cols;
    double* yi = y.data.data() + i * y.cols;
    for (std::size_t j = 0; j < w.rows; ++j) {
      const double* wj = w.data.data() + j * w.cols;
      double acc = 0.0;
      for (std::size_t k = 0; k < x.cols; ++k) acc += xi[k] * wj[k];
      yi[j] = acc;
    }
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double c, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

}  // namespace rankatt
