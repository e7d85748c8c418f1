#pragma once

#include <span>
#include <vector>

#include "wefend/model/extractor.hpp"
#include "wefend/model/training.hpp"
#include "wefend/nn/adam.hpp"
#include "wefend/nn/ops.hpp"

namespace wefend {

/// A content sequence with a (gold or weak) binary label, 1 = fake.
struct Example {
  TokenSequence tokens;
  int label = 0;
};

struct DetectorCache {
  ExtractorCache extractor;
  double probability = 0.5;
};

/// Content-side model: embedding copy, text CNN, and Fake-fc [40 x 1].
class Detector {
 public:
  Detector() = default;

  Detector(EmbeddingTable embedding, const ExtractorConfig& cfg, Rng& rng)
      : embedding_(std::move(embedding)), extractor_(cfg, rng) {
    fake_fc_ = glorot_parameter(cfg.output_dim, 1, rng);
  }

  EmbeddingTable& embedding() { return embedding_; }
  const EmbeddingTable& embedding() const { return embedding_; }
  TextCnn& extractor() { return extractor_; }
  const TextCnn& extractor() const { return extractor_; }
  Parameter& fake_fc() { return fake_fc_; }
  const Parameter& fake_fc() const { return fake_fc_; }

  ParameterRefs params() {
    ParameterRefs out;
    out.push_back({"embedding", &embedding_.matrix});
    extractor_.append_params(out, "extractor.");
    out.push_back({"fake_fc", &fake_fc_});
    return out;
  }

  double forward(const TokenSequence& seq, DetectorCache& cache) const {
    extractor_.forward(seq, embedding_, cache.extractor);
    double logit = 0.0;
    const auto& h = cache.extractor.output;
    for (std::size_t j = 0; j < h.size(); ++j) logit += h[j] * fake_fc_.value[j];
    cache.probability = sigmoid(logit);
    return cache.probability;
  }

  double predict(const TokenSequence& seq) const {
    DetectorCache cache;
    return forward(seq, cache);
  }

  /// Latent 40-dim representation (extractor output).
  std::vector<double> latent(const TokenSequence& seq) const { return extractor_.features(seq, embedding_); }

  void backward(const DetectorCache& cache, double grad_logit) {
    const auto& h = cache.extractor.output;
    std::vector<double> grad_h(h.size());
    for (std::size_t j = 0; j < h.size(); ++j) {
      fake_fc_.grad[j] += h[j] * grad_logit;
      grad_h[j] = fake_fc_.value[j] * grad_logit;
    }
    extractor_.backward(cache.extractor, grad_h, embedding_);
  }

  void set_zero() {
    embedding_.matrix.value.fill(0.0);
    extractor_.set_zero();
    fake_fc_.value.fill(0.0);
  }

 private:
  EmbeddingTable embedding_;
  TextCnn extractor_;
  Parameter fake_fc_;
};

/// Mean BCE of the detector over `batch` (indices into `data`), scaled by
/// `weight`. Gradients of weight * mean-BCE are accumulated when requested.
inline double detector_bce(Detector& model, std::span<const Example> data, std::span<const std::size_t> batch,
                           double weight, bool with_grad) {
  if (batch.empty()) return 0.0;
  const double scale = weight / static_cast<double>(batch.size());
  double total = 0.0;
  DetectorCache cache;
  for (std::size_t i : batch) {
    const auto& ex = data[i];
    const double p = model.forward(ex.tokens, cache);
    total += bce_loss(p, ex.label);
    if (with_grad && weight != 0.0) model.backward(cache, scale * bce_grad(p, ex.label) * p * (1.0 - p));
  }
  return total * scale;
}

/// Combined objective over a labeled batch and a selected (weakly labeled) batch:
///   lambda_l * meanBCE(labeled) + lambda_s * meanBCE(selected).
/// An empty batch contributes nothing.
struct LossWeights {
  double lambda_l = 1.0;
  double lambda_s = 1.0;
  double lambda_entropy = 0.1;
};

inline double combined_loss(Detector& model, std::span<const Example> labeled,
                            std::span<const std::size_t> labeled_batch, std::span<const Example> selected,
                            std::span<const std::size_t> selected_batch, const LossWeights& w, bool with_grad) {
  double loss = detector_bce(model, labeled, labeled_batch, w.lambda_l, with_grad);
  if (w.lambda_s != 0.0) loss += detector_bce(model, selected, selected_batch, w.lambda_s, with_grad);
  return loss;
}

/// Mean binary entropy of predictions over an unlabeled batch, scaled by `weight`.
inline double entropy_loss(Detector& model, std::span<const TokenSequence> unlabeled,
                           std::span<const std::size_t> batch, double weight, bool with_grad) {
  if (batch.empty()) return 0.0;
  const double scale = weight / static_cast<double>(batch.size());
  double total = 0.0;
  DetectorCache cache;
  for (std::size_t i : batch) {
    const double p = model.forward(unlabeled[i], cache);
    total += binary_entropy(p);
    if (with_grad && weight != 0.0) model.backward(cache, scale * binary_entropy_grad(p) * p * (1.0 - p));
  }
  return total * scale;
}

inline std::vector<double> detector_scores(const Detector& model, std::span<const Example> data) {
  std::vector<double> out;
  out.reserve(data.size());
  DetectorCache cache;
  for (const auto& ex : data) out.push_back(model.forward(ex.tokens, cache));
  return out;
}

inline double detector_accuracy(const Detector& model, std::span<const Example> data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  DetectorCache cache;
  for (const auto& ex : data) correct += decide(model.forward(ex.tokens, cache)) == ex.label;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace wefend
