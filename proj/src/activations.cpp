#include "rankatt/activations.hpp"

#include <algorithm>
#include <cmath>

#include "rankatt/errors.hpp"

namespace rankatt {

Vec relu(std::span<const double> x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

void relu_inplace(Matrix& x) {
  for (double& v : x.data) {
    if (v < 0.0) v = 0.0;
  }
}

void relu_backward_inplace(const Matrix& out, Matrix& dout) {
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] <= 0.0) dout.data[i] = 0.0;
  }
}

Vec softmax_stable(std::span<const double> x) {
  if (x.empty()) {
    throw ShapeError("softmax_stable: empty input");
  }
  const double mx = *std::max_element(x.begin(), x.end());
  Vec y(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - mx);
    sum += y[i];
  }
  const double inv = 1.0 / sum;
  for (double& v : y) v *= inv;
  return y;
}

Vec softmax_backward(std::span<const double> alpha, std::span<const double> dalpha) {
  const double inner = dot(alpha, dalpha);
  Vec dz(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    dz[i] = alpha[i] * (dalpha[i] - inner);
  }
  return dz;
}

}  // namespace rankatt
