#include "rankatt/grad_check.hpp"

#include <cmath>

#include "rankatt/errors.hpp"

namespace rankatt {

double grad_check(const std::function<double()>& loss_fn,
                  const std::vector<ParamView>& params, double eps) {
  zero_grads(params);
  const double base = loss_fn();
  if (!std::isfinite(base)) {
    throw NumericError("grad_check: loss is not finite at the base point");
  }

  std::vector<Vec> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    analytic.emplace_back(p.grad, p.grad + p.size);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamView& p = params[i];
    for (std::size_t j = 0; j < p.size; ++j) {
      const double saved = p.value[j];
      p.value[j] = saved + eps;
      zero_grads(params);
      const double up = loss_fn();
      p.value[j] = saved - eps;
      zero_grads(params);
      const double down = loss_fn();
      p.value[j] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("grad_check: loss is not finite at a probe point");
      }
      const double fd = (up - down) / (2.0 * eps);
      const double an = analytic[i][j];
      const double err =
          std::abs(fd - an) / std::max(1e-8, std::abs(fd) + std::abs(an));
      worst = std::max(worst, err);
    }
  }

  // Leave the analytic gradient in place for callers that inspect it.
  zero_grads(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(analytic[i].begin(), analytic[i].end(), params[i].grad);
  }
  return worst;
}

}  // namespace rankatt
