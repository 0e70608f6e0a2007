#pragma once

#include "rankatt/matrix.hpp"

namespace rankatt {

Vec relu(std::span<const double> x);
void relu_inplace(Matrix& x);

/// Backward through relu given the forward *output*: passes gradient where
/// out > 0. Subgradient at 0 is taken as 0.
void relu_backward_inplace(const Matrix& out, Matrix& dout);

/// Numerically stable softmax (max-subtracted). Output sums to 1.
Vec softmax_stable(std::span<const double> x);

/// Jacobian-vector product of softmax: dz = alpha .* (dalpha - <dalpha, alpha>).
Vec softmax_backward(std::span<const double> alpha, std::span<const double> dalpha);

}  // namespace rankatt
