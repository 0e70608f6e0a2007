#pragma once

#include <cstdint>
#include <vector>

#include "rankatt/matrix.hpp"

namespace rankatt {

/// Non-owning view onto one parameter block and its gradient buffer.
struct ParamView {
  double* value = nullptr;
  double* grad = nullptr;
  std::size_t size = 0;
};

void zero_grads(const std::vector<ParamView>& params);
std::size_t total_size(const std::vector<ParamView>& params);

/// Bias-corrected Adam over a fixed list of parameter blocks. Moment buffers
/// are laid out to mirror the blocks given at init.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Vec> m;
  std::vector<Vec> v;

  void init(const std::vector<ParamView>& params);
  bool initialized() const { return !m.empty(); }
};

/// One Adam update; increments state.step. Shapes must match the init-time
/// blocks.
void adam_step(const std::vector<ParamView>& params, AdamState& state);

}  // namespace rankatt
