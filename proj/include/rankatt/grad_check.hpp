#pragma once

#include <functional>

#include "rankatt/adam.hpp"

namespace rankatt {

/// Central finite differences vs. analytic gradients.
///
/// `loss_fn` must (a) return the scalar loss at the current parameter values
/// and (b) accumulate analytic gradients into the views' grad buffers. The
/// check zeroes gradients, runs loss_fn once to collect the analytic
/// gradient, then perturbs every coordinate by +/-eps and compares. Returns
/// the max over coordinates of |g_fd - g_an| / max(1e-8, |g_fd| + |g_an|).
double grad_check(const std::function<double()>& loss_fn,
                  const std::vector<ParamView>& params, double eps = 1e-5);

}  // namespace rankatt
