#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wefend/nn/rng.hpp"
#include "wefend/nn/tensor.hpp"

namespace wefend {

/// Loss callback for the checker. With `with_grad` set it must also accumulate
/// the analytic gradient into every parameter's `grad` (grads are zeroed first).
using LossFn = std::function<double(bool with_grad)>;

/// Coordinates the checker must not probe (e.g. the frozen PAD embedding row,
/// whose forward value matters but whose gradient is masked by design).
using ProbeFilter = std::function<bool(const NamedParameter&, std::size_t index)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t probes = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compare the analytic gradient against central differences at `probe_count`
/// random coordinates (chosen proportionally to parameter size).
inline GradCheckResult grad_check(const LossFn& loss, const ParameterRefs& params,
                                  std::size_t probe_count, Rng& rng, double step = 1e-5,
                                  const ProbeFilter& skip = {}) {
  zero_grads(params);
  loss(true);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.param->grad);
  zero_grads(params);

  const std::size_t total = parameter_count(params);
  GradCheckResult result;
  if (total == 0) return result;

  std::size_t attempts = 0;
  while (result.probes < probe_count && attempts < probe_count * 100) {
    ++attempts;
    std::size_t flat = rng.below(total);
    std::size_t which = 0;
    while (flat >= params[which].param->size()) flat -= params[which++].param->size();
    if (skip && skip(params[which], flat)) continue;

    double& x = params[which].param->value[flat];
    const double saved = x;
    x = saved + step;
    const double up = loss(false);
    x = saved - step;
    const double down = loss(false);
    x = saved;

    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[which][flat];
    const double err = relative_error(a, numeric);
    ++result.probes;
    if (result.probes == 1 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_parameter = params[which].name;
      result.worst_index = flat;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
  }
  zero_grads(params);
  return result;
}

}  // namespace wefend
