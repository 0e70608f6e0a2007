#include "rankatt/affine.hpp"

#include <cmath>

#include "rankatt/errors.hpp"

namespace rankatt {

Vec AffineLayer::forward(std::span<const double> x) const {
  if (x.size() != in_dim()) {
    throw ShapeError("affine forward: input length " +
                     std::to_string(x.size()) + " != in_dim " +
                     std::to_string(in_dim()));
  }
  Vec y(out_dim());
  for (std::size_t o = 0; o < out_dim(); ++o) {
    y[o] = b[o] + dot(w.row(o), x);
  }
  return y;
}

Matrix AffineLayer::forward(const Matrix& x) const {
  if (x.cols != in_dim()) {
    throw ShapeError("affine forward: input cols != in_dim");
  }
  Matrix y = matmul_nt(x, w);
  for (std::size_t i = 0; i < y.rows; ++i) {
    double* yi = y.data.data() + i * y.cols;
    for (std::size_t o = 0; o < y.cols; ++o) yi[o] += b[o];
  }
  return y;
}

Vec AffineLayer::backward(std::span<const double> x, std::span<const double> dy) {
  if (x.size() != in_dim() || dy.size() != out_dim()) {
    throw ShapeError("affine backward: shape mismatch");
  }
  Vec dx(in_dim(), 0.0);
  for (std::size_t o = 0; o < out_dim(); ++o) {
    const double g = dy[o];
    db[o] += g;
    axpy(g, x, dw.row(o));
    axpy(g, w.row(o), dx);
  }
  return dx;
}

Matrix AffineLayer::backward(const Matrix& x, const Matrix& dy) {
  backward_params_only(x, dy);
  Matrix dx(x.rows, in_dim());
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* gi = dy.data.data() + i * dy.cols;
    double* di = dx.data.data() + i * dx.cols;
    for (std::size_t o = 0; o < out_dim(); ++o) {
      if (gi[o] == 0.0) continue;
      axpy(gi[o], w.row(o), {di, in_dim()});
    }
  }
  return dx;
}

void AffineLayer::backward_params_only(const Matrix& x, const Matrix& dy) {
  if (x.cols != in_dim() || dy.cols != out_dim() || x.rows != dy.rows) {
    throw ShapeError("affine backward: shape mismatch");
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.data.data() + i * x.cols;
    const double* gi = dy.data.data() + i * dy.cols;
    for (std::size_t o = 0; o < out_dim(); ++o) {
      const double g = gi[o];
      if (g == 0.0) continue;
      db[o] += g;
      double* dwo = dw.data.data() + o * dw.cols;
      for (std::size_t k = 0; k < in_dim(); ++k) dwo[k] += g * xi[k];
    }
  }
}

void AffineLayer::zero_grad() {
  dw.fill(0.0);
  std::fill(db.begin(), db.end(), 0.0);
}

bool AffineLayer::grads_zero() const {
  for (double v : dw.data) {
    if (v != 0.0) return false;
  }
  for (double v : db) {
    if (v != 0.0) return false;
  }
  return true;
}

void glorot_init(AffineLayer& layer, Rng& rng) {
  const double bound =
      std::sqrt(6.0 / static_cast<double>(layer.in_dim() + layer.out_dim()));
  for (double& v : layer.w.data) v = rng.uniform(-bound, bound);
  std::fill(layer.b.begin(), layer.b.end(), 0.0);
  layer.zero_grad();
}

}  // namespace rankatt
