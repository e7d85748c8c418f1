#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/model/extractor.hpp"
#include "wefend/model/training.hpp"
#include "wefend/nn/adam.hpp"
#include "wefend/nn/ops.hpp"
#include "wefend/text/embedding.hpp"

namespace wefend {

inline constexpr std::size_t kAggregateDim = 20;

/// Report messages attached to one news item. Order carries no meaning.
struct ReportSet {
  std::vector<TokenSequence> reports;
};

struct LabeledReports {
  ReportSet reports;
  int label = 0;
};

struct WeakLabel {
  int label = 0;
  double confidence = 0.5;  // annotator probability of "fake"
};

/// Indices of `features` in lexicographic order of their values. Summing in
/// this order makes the mean independent of the caller's ordering, bit for bit.
inline std::vector<std::size_t> canonical_order(const std::vector<std::vector<double>>& features) {
  std::vector<std::size_t> idx(features.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return features[a] < features[b]; });
  return idx;
}

inline std::vector<double> mean_features(const std::vector<std::vector<double>>& features) {
  if (features.empty()) throw PreconditionError("aggregate_reports: empty report set");
  const std::size_t dim = features.front().size();
  std::vector<double> mean(dim, 0.0);
  for (std::size_t i : canonical_order(features)) {
    if (features[i].size() != dim) throw DimensionError("aggregate_reports: ragged report features");
    for (std::size_t j = 0; j < dim; ++j) mean[j] += features[i][j];
  }
  const double inv = 1.0 / static_cast<double>(features.size());
  for (double& m : mean) m *= inv;
  return mean;
}

/// Aggregation cell: ReLU(mean(features) . w_r).
inline std::vector<double> aggregate_reports(const std::vector<std::vector<double>>& features, const Parameter& w_r) {
  auto mean = mean_features(features);
  if (w_r.value.rank() != 2 || w_r.value.dim(0) != mean.size())
    throw DimensionError("aggregate_reports: w_r shape " + Tensor::shape_string(w_r.shape()) +
                         " does not accept " + std::to_string(mean.size()) + "-dim features");
  std::vector<double> h(w_r.value.dim(1), 0.0);
  matvec_accumulate(mean, w_r.value.data(), h.size(), h);
  for (double& v : h) v = v > 0.0 ? v : 0.0;
  return h;
}

struct AnnotatorCache {
  std::vector<ExtractorCache> reports;
  std::vector<double> mean;
  std::vector<double> hidden_pre;
  std::vector<double> hidden;
  double probability = 0.5;
};

/// Report-side model: its own embedding copy and extractor, the aggregation
/// projection w_r [40 x 20], and Ann-fc [20 x 1].
class Annotator {
 public:
  Annotator() = default;

  Annotator(EmbeddingTable embedding, const ExtractorConfig& cfg, Rng& rng)
      : embedding_(std::move(embedding)), extractor_(cfg, rng) {
    w_r_ = glorot_parameter(cfg.output_dim, kAggregateDim, rng);
    ann_fc_ = glorot_parameter(kAggregateDim, 1, rng);
  }

  EmbeddingTable& embedding() { return embedding_; }
  const EmbeddingTable& embedding() const { return embedding_; }
  TextCnn& extractor() { return extractor_; }
  const TextCnn& extractor() const { return extractor_; }
  Parameter& w_r() { return w_r_; }
  const Parameter& w_r() const { return w_r_; }
  Parameter& ann_fc() { return ann_fc_; }
  const Parameter& ann_fc() const { return ann_fc_; }

  ParameterRefs params() {
    ParameterRefs out;
    out.push_back({"embedding", &embedding_.matrix});
    extractor_.append_params(out, "extractor.");
    out.push_back({"w_r", &w_r_});
    out.push_back({"ann_fc", &ann_fc_});
    return out;
  }

  double forward(const ReportSet& rs, AnnotatorCache& cache) const {
    if (rs.reports.empty()) throw PreconditionError("annotator: report set must be non-empty");
    cache.reports.resize(rs.reports.size());
    std::vector<std::vector<double>> feats(rs.reports.size());
    for (std::size_t i = 0; i < rs.reports.size(); ++i) {
      extractor_.forward(rs.reports[i], embedding_, cache.reports[i]);
      feats[i] = cache.reports[i].output;
    }
    cache.mean = mean_features(feats);
    cache.hidden_pre.assign(kAggregateDim, 0.0);
    matvec_accumulate(cache.mean, w_r_.value.data(), kAggregateDim, cache.hidden_pre);
    cache.hidden.resize(kAggregateDim);
    double logit = 0.0;
    for (std::size_t j = 0; j < kAggregateDim; ++j) {
      cache.hidden[j] = cache.hidden_pre[j] > 0.0 ? cache.hidden_pre[j] : 0.0;
      logit += cache.hidden[j] * ann_fc_.value[j];
    }
    cache.probability = sigmoid(logit);
    return cache.probability;
  }

  double predict(const ReportSet& rs) const {
    AnnotatorCache cache;
    return forward(rs, cache);
  }

  /// Backpropagate dL/d(logit).
  void backward(const AnnotatorCache& cache, double grad_logit) {
    std::vector<double> grad_hidden(kAggregateDim);
    for (std::size_t j = 0; j < kAggregateDim; ++j) {
      ann_fc_.grad[j] += cache.hidden[j] * grad_logit;
      grad_hidden[j] = cache.hidden_pre[j] > 0.0 ? ann_fc_.value[j] * grad_logit : 0.0;
    }
    const std::size_t in = cache.mean.size();
    std::vector<double> grad_mean(in, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < kAggregateDim; ++j) {
        w_r_.grad[i * kAggregateDim + j] += cache.mean[i] * grad_hidden[j];
        acc += w_r_.value[i * kAggregateDim + j] * grad_hidden[j];
      }
      grad_mean[i] = acc / static_cast<double>(cache.reports.size());
    }
    for (const auto& rc : cache.reports) extractor_.backward(rc, grad_mean, embedding_);
  }

  void set_zero() {
    embedding_.matrix.value.fill(0.0);
    extractor_.set_zero();
    w_r_.value.fill(0.0);
    ann_fc_.value.fill(0.0);
  }

 private:
  EmbeddingTable embedding_;
  TextCnn extractor_;
  Parameter w_r_;
  Parameter ann_fc_;
};

/// Mean BCE over a set of labeled report sets; with `with_grad`, accumulates
/// gradients of that mean.
inline double annotator_loss(Annotator& model, std::span<const LabeledReports> data,
                             std::span<const std::size_t> batch, bool with_grad) {
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  AnnotatorCache cache;
  for (std::size_t i : batch) {
    const auto& ex = data[i];
    const double p = model.forward(ex.reports, cache);
    total += bce_loss(p, ex.label);
    if (with_grad) model.backward(cache, scale * bce_grad(p, ex.label) * p * (1.0 - p));
  }
  return total * scale;
}

inline double annotator_accuracy(const Annotator& model, std::span<const LabeledReports> data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data) correct += decide(model.predict(ex.reports)) == ex.label;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

struct AnnotatorTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = kDefaultBatchSize;
  AdamConfig adam{};
};

struct AnnotatorTrainResult {
  Annotator model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double initial_loss = 0.0;
};

/// Mini-batch Adam on mean BCE. Keeps the parameters of the epoch with the best
/// validation accuracy (first one on ties); without validation data, the last epoch.
inline AnnotatorTrainResult train_annotator(Annotator model, std::span<const LabeledReports> train,
                                            std::span<const LabeledReports> validation,
                                            const AnnotatorTrainConfig& cfg, Rng& rng) {
  if (train.empty()) throw PreconditionError("train_annotator: empty training set");
  for (const auto& ex : train) check_label(ex.label);

  AnnotatorTrainResult result;
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  result.initial_loss = annotator_loss(model, train, all, false);

  AdamConfig adam = cfg.adam;
  double best_acc = -1.0;
  result.model = model;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto params = model.params();
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : make_batches(train.size(), cfg.batch_size, rng)) {
      loss_sum += annotator_loss(model, train, batch, true) * static_cast<double>(batch.size());
      seen += batch.size();
      adam_step(params, adam);
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), 0.0};
    if (!validation.empty()) {
      rec.validation_accuracy = annotator_accuracy(model, validation);
      if (rec.validation_accuracy > best_acc) {
        best_acc = rec.validation_accuracy;
        result.model = model;
        result.best_epoch = epoch;
      }
    } else {
      result.model = model;
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
  }
  return result;
}

/// Weak label and confidence for one report set.
inline WeakLabel annotate_one(const Annotator& model, const ReportSet& rs) {
  const double p = model.predict(rs);
  return {decide(p), p};
}

}  // namespace wefend
