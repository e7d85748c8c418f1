#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/eval/metrics.hpp"
#include "wefend/model/detector.hpp"
#include "wefend/selector/selector.hpp"

namespace wefend {

enum class TrainingMode { supervised, semi_supervised, weakly_supervised, wefend_minus, wefend };

inline const char* mode_name(TrainingMode m) {
  switch (m) {
    case TrainingMode::supervised: return "supervised";
    case TrainingMode::semi_supervised: return "semi_supervised";
    case TrainingMode::weakly_supervised: return "weakly_supervised";
    case TrainingMode::wefend_minus: return "wefend_minus";
    case TrainingMode::wefend: return "wefend";
  }
  return "?";
}

inline TrainingMode parse_mode(const std::string& s) {
  for (auto m : {TrainingMode::supervised, TrainingMode::semi_supervised, TrainingMode::weakly_supervised,
                 TrainingMode::wefend_minus, TrainingMode::wefend})
    if (s == mode_name(m)) return m;
  throw ConfigError("unknown mode '" + s + "'");
}

inline bool mode_needs_weak(TrainingMode m) {
  return m == TrainingMode::weakly_supervised || m == TrainingMode::wefend_minus || m == TrainingMode::wefend;
}

inline bool mode_needs_labeled(TrainingMode m) { return m != TrainingMode::weakly_supervised; }

struct DetectorTrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = kDefaultBatchSize;
  AdamConfig adam{};
  LossWeights weights{};
  SelectorConfig selector{};
  std::size_t selector_refresh = 1;  // run the selector every N epochs (wefend only)
};

/// Everything train_detector may read. Spans that a mode does not use may be empty.
struct DetectorTrainData {
  std::span<const Example> labeled;
  std::span<const WeakCandidate> weak;
  std::span<const TokenSequence> unlabeled;  // semi-supervised entropy term
  std::span<const Example> validation;       // checkpoint selection
  std::span<const Example> reward_validation;  // selector reward (labeled)
  std::span<const Example> test;             // reported per epoch, never used for selection
  std::span<const int> weak_truth;           // optional ground truth for `weak`, audit only
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  MetricsReport validation;
  std::optional<MetricsReport> test;
  std::size_t selected = 0;                 // weak samples used this epoch
  std::optional<double> selected_label_accuracy;  // vs weak_truth, when supplied
};

struct DetectorTrainResult {
  Detector model;
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> history;  // entry 0 is the untrained model
  std::vector<double> selector_rewards;
};

inline MetricsReport evaluate_detector(const Detector& model, std::span<const Example> data) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(data.size());
  labels.reserve(data.size());
  DetectorCache cache;
  for (const auto& ex : data) {
    scores.push_back(model.forward(ex.tokens, cache));
    labels.push_back(ex.label);
  }
  return compute_metrics(scores, labels);
}

/// Train a content detector under one of the five settings:
///  - supervised:        BCE on labeled data
///  - semi_supervised:   labeled BCE + lambda_entropy * entropy on unlabeled content
///  - weakly_supervised: BCE on weak labels only
///  - wefend_minus:      combined loss over labeled + every weak sample
///  - wefend:            combined loss over labeled + the selector's output,
///                       re-selected every `selector_refresh` epochs
/// Two-source modes draw one batch from each source per step; an epoch is
/// ceil(max(n_a, n_b) / batch) steps. Returns the best-validation-accuracy epoch.
inline DetectorTrainResult train_detector(Detector model, const DetectorTrainData& data, TrainingMode mode,
                                          const DetectorTrainConfig& cfg, Rng& rng, Rng& selector_rng,
                                          ReinforcedSelector* selector = nullptr) {
  if (mode_needs_weak(mode) && data.weak.empty())
    throw ConfigError(std::string("mode ") + mode_name(mode) + " requires a weakly labeled set");
  if (mode_needs_labeled(mode) && data.labeled.empty())
    throw ConfigError(std::string("mode ") + mode_name(mode) + " requires labeled data");
  if (mode == TrainingMode::semi_supervised && data.unlabeled.empty())
    throw ConfigError("mode semi_supervised requires unlabeled content");
  if (mode == TrainingMode::wefend && !selector) throw ConfigError("mode wefend requires a selector");
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");

  std::vector<Example> weak_examples;
  for (const auto& c : data.weak) weak_examples.push_back({c.tokens, c.weak_label});

  std::vector<Example> selected;
  std::optional<double> selected_acc;
  auto use_selection = [&](const std::vector<std::size_t>& idx) {
    selected.clear();
    for (auto i : idx) selected.push_back(weak_examples[i]);
    selected_acc.reset();
    if (!data.weak_truth.empty() && !idx.empty()) {
      std::size_t ok = 0;
      for (auto i : idx) ok += data.weak_truth[i] == weak_examples[i].label;
      selected_acc = static_cast<double>(ok) / static_cast<double>(idx.size());
    }
  };
  if (mode == TrainingMode::weakly_supervised || mode == TrainingMode::wefend_minus) {
    std::vector<std::size_t> all(weak_examples.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    use_selection(all);
  }

  DetectorTrainResult result;
  auto snapshot = [&](std::size_t epoch, double loss) {
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss;
    if (!data.validation.empty()) m.validation = evaluate_detector(model, data.validation);
    if (!data.test.empty()) m.test = evaluate_detector(model, data.test);
    m.selected = selected.size();
    m.selected_label_accuracy = selected_acc;
    return m;
  };
  result.history.push_back(snapshot(0, 0.0));

  AdamConfig adam = cfg.adam;
  double best = -1.0;
  result.model = model;
  const std::size_t bs = cfg.batch_size;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (mode == TrainingMode::wefend && (epoch - 1) % std::max<std::size_t>(cfg.selector_refresh, 1) == 0) {
      SelectionResult sel = selector->run(data.weak, model, data.reward_validation, selector_rng);
      result.selector_rewards.insert(result.selector_rewards.end(), sel.phase1_rewards.begin(),
                                     sel.phase1_rewards.end());
      use_selection(sel.selected);
    }

    auto params = model.params();
    double loss_sum = 0.0;
    std::size_t steps = 0;
    switch (mode) {
      case TrainingMode::supervised:
      case TrainingMode::weakly_supervised: {
        std::span<const Example> source = mode == TrainingMode::supervised ? data.labeled : std::span<const Example>(selected);
        for (const auto& batch : make_batches(source.size(), bs, rng)) {
          loss_sum += detector_bce(model, source, batch, 1.0, true);
          adam_step(params, adam);
          ++steps;
        }
        break;
      }
      case TrainingMode::semi_supervised: {
        BatchCycler lab(data.labeled.size(), bs), unl(data.unlabeled.size(), bs);
        const std::size_t n_steps = (data.labeled.size() + bs - 1) / bs;
        for (std::size_t s = 0; s < n_steps; ++s) {
          const auto lb = lab.next(rng);
          const auto ub = unl.next(rng);
          loss_sum += detector_bce(model, data.labeled, lb, cfg.weights.lambda_l, true);
          loss_sum += entropy_loss(model, data.unlabeled, ub, cfg.weights.lambda_entropy, true);
          adam_step(params, adam);
          ++steps;
        }
        break;
      }
      case TrainingMode::wefend_minus:
      case TrainingMode::wefend: {
        BatchCycler lab(data.labeled.size(), bs), sel(selected.size(), bs);
        const std::size_t n = std::max(data.labeled.size(), selected.size());
        const std::size_t n_steps = (n + bs - 1) / bs;
        for (std::size_t s = 0; s < n_steps; ++s) {
          const auto lb = lab.next(rng);
          const auto sb = sel.next(rng);
          loss_sum += combined_loss(model, data.labeled, lb, selected, sb, cfg.weights, true);
          adam_step(params, adam);
          ++steps;
        }
        break;
      }
    }

    EpochMetrics m = snapshot(epoch, steps ? loss_sum / static_cast<double>(steps) : 0.0);
    const double val_acc = data.validation.empty() ? 0.0 : m.validation.accuracy;
    if (data.validation.empty() || val_acc > best) {
      best = val_acc;
      result.model = model;
      result.best_epoch = epoch;
    }
    result.history.push_back(std::move(m));
  }
  return result;
}

}  // namespace wefend
