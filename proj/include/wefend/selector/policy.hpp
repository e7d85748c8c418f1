#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/nn/ops.hpp"
#include "wefend/nn/rng.hpp"
#include "wefend/nn/tensor.hpp"

namespace wefend {

inline constexpr std::size_t kStateHalf = 4;
inline constexpr std::size_t kStateDim = 8;

/// Selector state for one sample.
///   current:    annotator prob, detector prob, max cosine similarity to the
///               retained samples' latents, weak label (0/1)
///   chosen_avg: mean of the `current` parts of samples retained so far in the bag
struct SelectorState {
  std::array<double, kStateHalf> current{};
  std::array<double, kStateHalf> chosen_avg{};

  std::array<double, kStateDim> combined() const {
    std::array<double, kStateDim> s{};
    for (std::size_t i = 0; i < kStateHalf; ++i) {
      s[i] = current[i];
      s[kStateHalf + i] = chosen_avg[i];
    }
    return s;
  }
  friend bool operator==(const SelectorState&, const SelectorState&) = default;
};

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Direct (non-incremental) state construction from the full chosen history.
/// Empty history gives similarity 0 and a zero average.
inline SelectorState build_state(double annotator_prob, double detector_prob, std::span<const double> latent,
                                 int weak_label, const std::vector<std::vector<double>>& chosen_latents,
                                 const std::vector<std::array<double, kStateHalf>>& chosen_currents) {
  SelectorState s;
  double max_sim = 0.0;
  for (std::size_t i = 0; i < chosen_latents.size(); ++i) {
    const double c = cosine_similarity(latent, chosen_latents[i]);
    max_sim = i == 0 ? c : std::max(max_sim, c);
  }
  s.current = {annotator_prob, detector_prob, max_sim, static_cast<double>(weak_label)};
  if (!chosen_currents.empty()) {
    for (const auto& c : chosen_currents)
      for (std::size_t j = 0; j < kStateHalf; ++j) s.chosen_avg[j] += c[j];
    for (double& v : s.chosen_avg) v /= static_cast<double>(chosen_currents.size());
  }
  return s;
}

/// Incremental per-bag bookkeeping; produces the same states as build_state.
class BagTracker {
 public:
  SelectorState state(double annotator_prob, double detector_prob, std::span<const double> latent,
                      int weak_label) const {
    SelectorState s;
    double max_sim = 0.0;
    for (std::size_t i = 0; i < chosen_latents_.size(); ++i) {
      const double c = cosine_similarity(latent, *chosen_latents_[i]);
      max_sim = i == 0 ? c : std::max(max_sim, c);
    }
    s.current = {annotator_prob, detector_prob, max_sim, static_cast<double>(weak_label)};
    if (!chosen_latents_.empty()) {
      for (std::size_t j = 0; j < kStateHalf; ++j)
        s.chosen_avg[j] = sum_[j] / static_cast<double>(chosen_latents_.size());
    }
    return s;
  }

  /// Record a retained sample. `latent` must outlive the tracker.
  void retain(const SelectorState& s, const std::vector<double>& latent) {
    chosen_latents_.push_back(&latent);
    for (std::size_t j = 0; j < kStateHalf; ++j) sum_[j] += s.current[j];
  }

  std::size_t retained() const { return chosen_latents_.size(); }

 private:
  std::vector<const std::vector<double>*> chosen_latents_;
  std::array<double, kStateHalf> sum_{};
};

/// Two bias-free fully connected layers: w_s1 [8 x 8], w_s2 [8 x 1].
struct PolicyParams {
  Parameter w_s1;
  Parameter w_s2;

  static PolicyParams zeros() {
    return {Parameter(Tensor({kStateDim, kStateDim})), Parameter(Tensor({kStateDim, 1}))};
  }

  static PolicyParams random(Rng& rng) {
    PolicyParams p;
    p.w_s1 = glorot_parameter(kStateDim, kStateDim, rng);
    p.w_s2 = glorot_parameter(kStateDim, 1, rng);
    return p;
  }

  ParameterRefs params() { return {{"w_s1", &w_s1}, {"w_s2", &w_s2}}; }

  bool same_values(const PolicyParams& o) const { return w_s1.value == o.w_s1.value && w_s2.value == o.w_s2.value; }
};

struct PolicyCache {
  std::array<double, kStateDim> input{};
  std::array<double, kStateDim> hidden_pre{};
  double probability = 0.5;
};

/// Retain probability sigmoid(w_s2 . ReLU(w_s1 . s)), kept inside
/// [kProbClamp, 1 - kProbClamp] so a saturated policy still samples both actions.
inline double policy_prob(const std::array<double, kStateDim>& s, const PolicyParams& theta, PolicyCache* cache = nullptr) {
  std::array<double, kStateDim> h{};
  matvec_accumulate(s, theta.w_s1.value.data(), kStateDim, h);
  double logit = 0.0;
  for (std::size_t j = 0; j < kStateDim; ++j) logit += (h[j] > 0.0 ? h[j] : 0.0) * theta.w_s2.value[j];
  const double p = clamp_prob(sigmoid(logit));
  if (cache) {
    cache->input = s;
    cache->hidden_pre = h;
    cache->probability = p;
  }
  return p;
}

inline double policy_prob(const SelectorState& s, const PolicyParams& theta) { return policy_prob(s.combined(), theta); }

/// pi(s, a): p for retain, 1 - p for remove.
inline double policy_action_prob(double retain_prob, int action) { return action == 1 ? retain_prob : 1.0 - retain_prob; }

/// Accumulate scale * d log pi(s, a) / d theta into theta's grad tensors.
inline void accumulate_log_policy_grad(const std::array<double, kStateDim>& s, int action, PolicyParams& theta,
                                       double scale) {
  PolicyCache c;
  const double p = policy_prob(s, theta, &c);
  const double grad_logit = scale * (action == 1 ? 1.0 - p : -p);
  std::array<double, kStateDim> grad_h{};
  for (std::size_t j = 0; j < kStateDim; ++j) {
    const double h = c.hidden_pre[j] > 0.0 ? c.hidden_pre[j] : 0.0;
    theta.w_s2.grad[j] += h * grad_logit;
    grad_h[j] = c.hidden_pre[j] > 0.0 ? theta.w_s2.value[j] * grad_logit : 0.0;
  }
  for (std::size_t i = 0; i < kStateDim; ++i)
    for (std::size_t j = 0; j < kStateDim; ++j) theta.w_s1.grad[i * kStateDim + j] += s[i] * grad_h[j];
}

/// Bernoulli(p): 1 = retain, 0 = remove.
inline int sample_action(double p, Rng& rng) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("sample_action: probability must lie in (0, 1)");
  return rng.uniform() < p ? 1 : 0;
}

struct TrajectoryStep {
  SelectorState state;
  int action = 0;
  double retain_prob = 0.5;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double reward = 0.0;
};

/// theta <- theta + alpha * sum_i R * grad log pi_theta(s_i, a_i)  (gradient ascent).
/// A zero reward leaves theta untouched bit for bit.
inline void reinforce_update(const Trajectory& traj, PolicyParams& theta, double alpha) {
  if (traj.reward == 0.0 || alpha == 0.0) return;
  theta.w_s1.zero_grad();
  theta.w_s2.zero_grad();
  for (const auto& step : traj.steps) accumulate_log_policy_grad(step.state.combined(), step.action, theta, 1.0);
  for (Parameter* p : {&theta.w_s1, &theta.w_s2}) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      p->value[i] += alpha * (traj.reward * p->grad[i]);
      p->grad[i] = 0.0;
    }
  }
}

/// theta' <- (1 - tau) theta' + tau theta. tau = 0 and tau = 1 are exact identity / copy.
inline void soft_update(PolicyParams& target, const PolicyParams& policy, double tau) {
  if (target.w_s1.shape() != policy.w_s1.shape() || target.w_s2.shape() != policy.w_s2.shape())
    throw DimensionError("soft_update: policy shapes differ");
  if (tau == 0.0) return;
  if (tau == 1.0) {
    target.w_s1.value = policy.w_s1.value;
    target.w_s2.value = policy.w_s2.value;
    return;
  }
  auto blend = [tau](Tensor& t, const Tensor& s) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * s[i];
  };
  blend(target.w_s1.value, policy.w_s1.value);
  blend(target.w_s2.value, policy.w_s2.value);
}

}  // namespace wefend
