#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/nn/rng.hpp"

namespace wefend {

/// Dense row-major array of doubles. Non-finite values are rejected at construction.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(count(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (count(shape_) != values_.size()) {
      throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                           std::to_string(values_.size()) + " values");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw DomainError("tensor values must be finite");
    }
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  static Tensor uniform(std::vector<std::size_t> shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.values_) v = rng.uniform(lo, hi);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// 2-D element access (row, col).
  double& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

  static std::size_t count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

  static std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

/// A trainable weight: value, gradient accumulator, and Adam moments, all of one shape.
struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;

  Parameter() = default;
  explicit Parameter(Tensor v)
      : value(std::move(v)),
        grad(value.shape()),
        adam_m(value.shape()),
        adam_v(value.shape()) {}

  const std::vector<std::size_t>& shape() const { return value.shape(); }
  std::size_t size() const { return value.size(); }

  void zero_grad() { grad.fill(0.0); }
  void reset_moments() {
    adam_m.fill(0.0);
    adam_v.fill(0.0);
  }
};

/// Glorot-uniform initialisation for a [fan_in x fan_out] weight.
inline Parameter glorot_parameter(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Parameter(Tensor::uniform({fan_in, fan_out}, -limit, limit, rng));
}

/// Non-owning, named view over a model's parameters. Order is significant
/// (checkpoints and gradient checks iterate it).
struct NamedParameter {
  std::string name;
  Parameter* param;
};
using ParameterRefs = std::vector<NamedParameter>;

inline void zero_grads(const ParameterRefs& params) {
  for (const auto& p : params) p.param->zero_grad();
}

inline std::size_t parameter_count(const ParameterRefs& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.param->size();
  return n;
}

}  // namespace wefend
