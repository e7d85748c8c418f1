#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "wefend/errors.hpp"
#include "wefend/nn/tensor.hpp"

namespace wefend {

inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

// ---------------------------------------------------------------------------
// Fully-connected layer without bias: y = x W, x [n x in], W [in x out].
// ---------------------------------------------------------------------------

/// Raw kernel: out[out_dim] += x[in_dim] . W[in_dim x out_dim].
inline void matvec_accumulate(std::span<const double> x, const double* w, std::size_t out_dim,
                              std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = w + i * out_dim;
    for (std::size_t j = 0; j < out_dim; ++j) out[j] += xi * row[j];
  }
}

inline Tensor linear(const Tensor& x, const Parameter& w) {
  if (x.rank() != 2 || w.value.rank() != 2 || x.dim(1) != w.value.dim(0)) {
    throw DimensionError("linear: cannot multiply " + Tensor::shape_string(x.shape()) + " by " +
                         Tensor::shape_string(w.shape()));
  }
  const std::size_t n = x.dim(0), in = x.dim(1), out = w.value.dim(1);
  Tensor y({n, out});
  for (std::size_t r = 0; r < n; ++r) {
    matvec_accumulate({x.data() + r * in, in}, w.value.data(), out, {y.data() + r * out, out});
  }
  return y;
}

/// Accumulates dL/dW into w.grad and returns dL/dx.
inline Tensor linear_backward(const Tensor& x, Parameter& w, const Tensor& grad_y) {
  const std::size_t n = x.dim(0), in = x.dim(1), out = w.value.dim(1);
  if (grad_y.rank() != 2 || grad_y.dim(0) != n || grad_y.dim(1) != out) {
    throw DimensionError("linear_backward: upstream gradient has shape " +
                         Tensor::shape_string(grad_y.shape()));
  }
  Tensor grad_x({n, in});
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.data() + r * in;
    const double* gr = grad_y.data() + r * out;
    for (std::size_t i = 0; i < in; ++i) {
      double* gw = w.grad.data() + i * out;
      const double* wr = w.value.data() + i * out;
      double acc = 0.0;
      for (std::size_t j = 0; j < out; ++j) {
        gw[j] += xr[i] * gr[j];
        acc += wr[j] * gr[j];
      }
      grad_x.data()[r * in + i] = acc;
    }
  }
  return grad_x;
}

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

/// Gradient through ReLU given its input. The derivative at exactly 0 is taken as 0.
inline Tensor relu_backward(const Tensor& x, const Tensor& grad_y) {
  Tensor g = grad_y;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(x[i] > 0.0)) g[i] = 0.0;
  return g;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = sigmoid(v);
  return y;
}

/// Gradient through sigmoid given its output y: dy/dx = y(1-y).
inline Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_y) {
  Tensor g = grad_y;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
  return g;
}

// ---------------------------------------------------------------------------
// Losses on a single probability
// ---------------------------------------------------------------------------

inline void check_label(int y) {
  if (y != 0 && y != 1) throw DomainError("binary label must be 0 or 1, got " + std::to_string(y));
}

/// -[y log p + (1-y) log(1-p)] with p clamped to [1e-7, 1-1e-7].
inline double bce_loss(double p, int y) {
  check_label(y);
  const double c = clamp_prob(p);
  return y == 1 ? -std::log(c) : -std::log(1.0 - c);
}

/// d bce / dp. Zero where the clamp is active (the clamped function is flat there).
inline double bce_grad(double p, int y) {
  check_label(y);
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return y == 1 ? -1.0 / p : 1.0 / (1.0 - p);
}

/// Binary entropy -[p log p + (1-p) log(1-p)] on the clamped probability.
inline double binary_entropy(double p) {
  const double c = clamp_prob(p);
  return -(c * std::log(c) + (1.0 - c) * std::log(1.0 - c));
}

/// d entropy / dp = log((1-p)/p); zero where the clamp is active.
inline double binary_entropy_grad(double p) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return std::log((1.0 - p) / p);
}

}  // namespace wefend
