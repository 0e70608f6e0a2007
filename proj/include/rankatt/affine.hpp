#pragma once

#include "rankatt/matrix.hpp"
#include "rankatt/rng.hpp"

namespace rankatt {

/// Fully connected layer y = W x + b with gradient buffers shaped like the
/// parameters. The caller keeps the forward input and hands it back to
/// backward(); gradients accumulate until zero_grad().
struct AffineLayer {
  Matrix w;   // out x in
  Vec b;      // out
  Matrix dw;
  Vec db;

  AffineLayer() = default;
  AffineLayer(std::size_t out, std::size_t in)
      : w(out, in), b(out, 0.0), dw(out, in), db(out, 0.0) {}

  std::size_t in_dim() const { return w.cols; }
  std::size_t out_dim() const { return w.rows; }

  Vec forward(std::span<const double> x) const;

  /// Row-batched forward: each row of x is one input vector.
  Matrix forward(const Matrix& x) const;

  /// Accumulates dw/db from (x, dy) and returns dL/dx.
  Vec backward(std::span<const double> x, std::span<const double> dy);
  Matrix backward(const Matrix& x, const Matrix& dy);

  /// Like backward() but skips dL/dx, for layers whose input is data.
  void backward_params_only(const Matrix& x, const Matrix& dy);

  void zero_grad();
  bool grads_zero() const;
};

/// Uniform [-sqrt(6/(in+out)), +sqrt(6/(in+out))] weights, zero biases.
void glorot_init(AffineLayer& layer, Rng& rng);

}  // namespace rankatt
