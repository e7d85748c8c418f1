#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/model/detector.hpp"
#include "wefend/selector/policy.hpp"

namespace wefend {

/// One weakly-labeled document offered to the selector.
struct WeakCandidate {
  std::string id;
  TokenSequence tokens;
  int weak_label = 0;
  double annotator_confidence = 0.5;
};

enum class SelectorOverride {
  none,        // learned policy (Algorithm 1)
  retain_all,  // bypass: every candidate is selected, in input order
};

struct SelectorConfig {
  std::size_t phase1_bags = 200;  // K
  std::size_t phase2_bags = 200;  // K
  std::size_t bag_size = 100;     // B
  double policy_lr = 1e-4;        // alpha
  double tau = 0.001;
  std::size_t reward_epochs = 1;
  std::size_t reward_batch_size = kDefaultBatchSize;
  double reward_lr = 1e-4;
  std::size_t validation_cap = 500;
  SelectorOverride override_mode = SelectorOverride::none;
};

/// Eq. 4: R_k = acc_k - acc.
inline double reward_from_accuracies(double acc_k, double base_acc) { return acc_k - base_acc; }

/// Fine-tune a throwaway copy of `base` on `retained` (weak labels) with a
/// fresh Adam state and return its validation accuracy minus `base_acc`.
/// The base detector is never modified. Empty retained set gives 0.
inline double compute_reward(std::span<const Example> retained, const Detector& base, std::span<const Example> validation,
                             double base_acc, const SelectorConfig& cfg, Rng& rng) {
  if (retained.empty()) return 0.0;
  Detector clone = base;
  auto params = clone.params();
  for (const auto& np : params) {
    np.param->zero_grad();
    np.param->reset_moments();
  }
  AdamConfig adam;
  adam.learning_rate = cfg.reward_lr;
  for (std::size_t e = 0; e < cfg.reward_epochs; ++e) {
    for (const auto& batch : make_batches(retained.size(), cfg.reward_batch_size, rng)) {
      detector_bce(clone, retained, batch, 1.0, true);
      adam_step(params, adam);
    }
  }
  return reward_from_accuracies(detector_accuracy(clone, validation), base_acc);
}

struct SelectionRecord {
  std::string id;
  int weak_label = 0;
  std::size_t occurrences = 0;  // times sampled into a phase-2 bag
  bool retained = false;        // retained in at least one bag
  double retain_prob = 0.0;     // mean over occurrences
};

struct SelectionResult {
  std::vector<std::size_t> selected;  // candidate indices, ascending, unique
  std::vector<SelectionRecord> records;
  std::vector<double> phase1_rewards;
  double base_accuracy = 0.0;
};

/// Frozen per-candidate quantities the selector reads while building states.
struct CandidateView {
  std::vector<double> detector_prob;
  std::vector<std::vector<double>> latent;
};

inline CandidateView view_candidates(const Detector& detector, std::span<const WeakCandidate> candidates) {
  CandidateView v;
  v.detector_prob.reserve(candidates.size());
  v.latent.reserve(candidates.size());
  DetectorCache cache;
  for (const auto& c : candidates) {
    v.detector_prob.push_back(detector.forward(c.tokens, cache));
    v.latent.push_back(cache.extractor.output);
  }
  return v;
}

/// Performance-driven data selector: a policy network trained with REINFORCE
/// on validation-accuracy rewards, plus a slowly tracking target network.
/// Both networks persist across calls to run(), so repeated selection rounds
/// continue training the same policy.
class ReinforcedSelector {
 public:
  ReinforcedSelector(SelectorConfig cfg, Rng& init_rng) : cfg_(cfg), policy_(PolicyParams::random(init_rng)) {
    target_ = policy_;
  }

  ReinforcedSelector(SelectorConfig cfg, PolicyParams initial) : cfg_(cfg), policy_(std::move(initial)) {
    target_ = policy_;
  }

  const SelectorConfig& config() const { return cfg_; }
  PolicyParams& policy() { return policy_; }
  const PolicyParams& policy() const { return policy_; }
  PolicyParams& target() { return target_; }
  const PolicyParams& target() const { return target_; }

  /// Run one bag through `acting` policy, sampling actions, returning the trajectory.
  Trajectory run_bag(const std::vector<std::size_t>& bag, std::span<const WeakCandidate> candidates,
                     const CandidateView& view, const PolicyParams& acting, Rng& rng) const {
    Trajectory traj;
    traj.steps.reserve(bag.size());
    BagTracker tracker;
    for (std::size_t idx : bag) {
      const auto& c = candidates[idx];
      TrajectoryStep step;
      step.state = tracker.state(c.annotator_confidence, view.detector_prob[idx], view.latent[idx], c.weak_label);
      step.retain_prob = policy_prob(step.state, acting);
      step.action = sample_action(step.retain_prob, rng);
      if (step.action == 1) tracker.retain(step.state, view.latent[idx]);
      traj.steps.push_back(step);
    }
    return traj;
  }

  /// Algorithm 1. Phase 1 trains the policy on K bags (even bags act through
  /// the policy network, odd through the target), phase 2 samples K fresh
  /// bags and keeps what the policy retains.
  SelectionResult run(std::span<const WeakCandidate> candidates, const Detector& detector,
                      std::span<const Example> validation, Rng& rng, const Detector* reward_base = nullptr) {
    SelectionResult result;
    if (cfg_.override_mode == SelectorOverride::retain_all) {
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        result.selected.push_back(i);
        result.records.push_back({candidates[i].id, candidates[i].weak_label, 1, true, 1.0});
      }
      return result;
    }
    if (cfg_.bag_size == 0 || candidates.size() < cfg_.bag_size)
      throw PreconditionError("run_selector: need at least bag_size (" + std::to_string(cfg_.bag_size) +
                              ") candidates, got " + std::to_string(candidates.size()));

    const Detector& base = reward_base ? *reward_base : detector;
    std::vector<Example> val(validation.begin(), validation.end());
    if (val.size() > cfg_.validation_cap) {
      auto keep = rng.sample_without_replacement(val.size(), cfg_.validation_cap);
      std::sort(keep.begin(), keep.end());
      std::vector<Example> capped;
      for (auto i : keep) capped.push_back(val[i]);
      val = std::move(capped);
    }
    result.base_accuracy = detector_accuracy(base, val);

    const CandidateView view = view_candidates(detector, candidates);

    for (std::size_t k = 0; k < cfg_.phase1_bags; ++k) {
      const auto bag = rng.sample_without_replacement(candidates.size(), cfg_.bag_size);
      const PolicyParams& acting = (k % 2 == 0) ? policy_ : target_;
      Trajectory traj = run_bag(bag, candidates, view, acting, rng);
      std::vector<Example> retained;
      for (std::size_t i = 0; i < bag.size(); ++i)
        if (traj.steps[i].action == 1)
          retained.push_back({candidates[bag[i]].tokens, candidates[bag[i]].weak_label});
      traj.reward = compute_reward(retained, base, val, result.base_accuracy, cfg_, rng);
      result.phase1_rewards.push_back(traj.reward);
      reinforce_update(traj, policy_, cfg_.policy_lr);
      soft_update(target_, policy_, cfg_.tau);
    }

    std::vector<std::size_t> occurrences(candidates.size(), 0);
    std::vector<double> prob_sum(candidates.size(), 0.0);
    std::vector<char> kept(candidates.size(), 0);
    for (std::size_t k = 0; k < cfg_.phase2_bags; ++k) {
      const auto bag = rng.sample_without_replacement(candidates.size(), cfg_.bag_size);
      const Trajectory traj = run_bag(bag, candidates, view, policy_, rng);
      for (std::size_t i = 0; i < bag.size(); ++i) {
        ++occurrences[bag[i]];
        prob_sum[bag[i]] += traj.steps[i].retain_prob;
        if (traj.steps[i].action == 1) kept[bag[i]] = 1;
      }
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (kept[i]) result.selected.push_back(i);
      SelectionRecord rec{candidates[i].id, candidates[i].weak_label, occurrences[i], kept[i] != 0, 0.0};
      if (occurrences[i]) rec.retain_prob = prob_sum[i] / static_cast<double>(occurrences[i]);
      result.records.push_back(std::move(rec));
    }
    return result;
  }

 private:
  SelectorConfig cfg_;
  PolicyParams policy_;
  PolicyParams target_;
};

/// Tab-separated audit file: id, weak_label, retained, retain_prob, occurrences.
/// Candidates never drawn into a bag carry retain_prob "NA".
inline void write_selection_report(const std::string& path, const SelectionResult& result) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "id\tweak_label\tretained\tretain_prob\toccurrences\n";
  os << std::setprecision(6) << std::fixed;
  for (const auto& r : result.records) {
    os << r.id << '\t' << r.weak_label << '\t' << (r.retained ? 1 : 0) << '\t';
    if (r.occurrences)
      os << r.retain_prob;
    else
      os << "NA";
    os << '\t' << r.occurrences << '\n';
  }
}

}  // namespace wefend
