#pragma once

#include <cmath>
#include <cstdint>

#include "wefend/errors.hpp"
#include "wefend/nn/tensor.hpp"

namespace wefend {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("adam: learning_rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw ConfigError("adam: betas must lie in (0, 1)");
  }
};

/// One bias-corrected Adam step over every parameter, then zero the gradients.
inline void adam_step(const ParameterRefs& params, AdamConfig& cfg) {
  cfg.validate();
  ++cfg.step_count;
  const double t = static_cast<double>(cfg.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const auto& np : params) {
    Parameter& p = *np.param;
    double* value = p.value.data();
    double* grad = p.grad.data();
    double* m = p.adam_m.data();
    double* v = p.adam_v.data();
    for (std::size_t i = 0, n = p.size(); i < n; ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      grad[i] = 0.0;
    }
  }
}

}  // namespace wefend
