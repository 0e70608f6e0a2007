#include "rankatt/adam.hpp"

#include <cmath>

#include "rankatt/errors.hpp"

namespace rankatt {

void zero_grads(const std::vector<ParamView>& params) {
  for (const auto& p : params) {
    std::fill(p.grad, p.grad + p.size, 0.0);
  }
}

std::size_t total_size(const std::vector<ParamView>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size;
  return n;
}

void AdamState::init(const std::vector<ParamView>& params) {
  if (lr <= 0.0) {
    throw NumericError("adam: learning rate must be positive");
  }
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.emplace_back(p.size, 0.0);
    v.emplace_back(p.size, 0.0);
  }
  step = 0;
}

void adam_step(const std::vector<ParamView>& params, AdamState& state) {
  if (!state.initialized()) state.init(params);
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter list does not match state");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamView& p = params[i];
    if (state.m[i].size() != p.size) {
      throw ShapeError("adam_step: block shape changed since init");
    }
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    for (std::size_t j = 0; j < p.size; ++j) {
      const double g = p.grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p.value[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace rankatt
