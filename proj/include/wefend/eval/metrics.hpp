#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/model/training.hpp"

namespace wefend {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;  // positive class = fake (1)
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct MetricsReport {
  double accuracy = 0.0;
  std::optional<double> auc_roc;  // absent when only one class is present
  ClassMetrics fake;
  ClassMetrics real;
  Confusion confusion;
};

inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

/// Mann-Whitney AUC with midranks for ties:
///   (sum of positive ranks - P(P+1)/2) / (P N).
/// Throws DomainError when either class is missing.
inline double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc_roc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        pos_rank_sum += midrank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw DomainError("auc_roc: undefined with a single class");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

/// Thresholded metrics (score > threshold means fake) plus AUC on the raw scores.
inline MetricsReport compute_metrics(std::span<const double> scores, std::span<const int> labels,
                                     double threshold = kDecisionThreshold) {
  if (scores.size() != labels.size()) throw DimensionError("compute_metrics: scores and labels differ in length");
  MetricsReport r;
  auto& c = r.confusion;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DomainError("compute_metrics: labels must be 0 or 1");
    const int pred = decide(scores[i], threshold);
    if (pred == 1) (labels[i] == 1 ? c.tp : c.fp)++;
    else (labels[i] == 0 ? c.tn : c.fn)++;
  }
  r.accuracy = c.total() ? static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()) : 0.0;
  r.fake = class_metrics(c.tp, c.fp, c.fn);
  r.real = class_metrics(c.tn, c.fn, c.fp);
  try {
    r.auc_roc = auc_roc(scores, labels);
  } catch (const DomainError&) {
    r.auc_roc.reset();
  }
  return r;
}

}  // namespace wefend
