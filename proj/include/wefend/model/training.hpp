#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "wefend/nn/rng.hpp"

namespace wefend {

inline constexpr std::size_t kDefaultBatchSize = 100;
inline constexpr double kDecisionThreshold = 0.5;

/// Label 1 (fake) iff probability is strictly above the threshold.
inline int decide(double probability, double threshold = kDecisionThreshold) {
  return probability > threshold ? 1 : 0;
}

/// Shuffled index batches covering [0, n) once.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return out;
}

/// Endless reshuffling batch source over [0, n); used when two data sources
/// of different sizes are consumed in lock-step.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::size_t batch_size) : n_(n), batch_size_(batch_size) {}

  std::vector<std::size_t> next(Rng& rng) {
    std::vector<std::size_t> out;
    if (n_ == 0) return out;
    while (out.size() < std::min(batch_size_, n_)) {
      if (pos_ == order_.size()) {
        order_.resize(n_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        rng.shuffle(order_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::size_t n_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Per-epoch record kept by every trainer.
struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
};

}  // namespace wefend
