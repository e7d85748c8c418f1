#pragma once

#include <string>
#include <vector>

#include "wefend/model/annotator.hpp"
#include "wefend/model/detector.hpp"
#include "wefend/nn/grad_check.hpp"
#include "wefend/selector/policy.hpp"

namespace wefend {

struct GradAuditEntry {
  std::string model;
  GradCheckResult result;
};

struct GradAuditConfig {
  std::size_t probes = 120;
  std::size_t vocab_size = 40;
  std::size_t embedding_dim = 8;
  std::size_t sequence_length = 10;
  std::size_t examples = 4;
  double step = 1e-5;
  double tolerance = 1e-4;
};

namespace detail {

inline TokenSequence random_sequence(std::size_t len, std::size_t vocab, Rng& rng) {
  TokenSequence s;
  for (std::size_t i = 0; i < len; ++i) s.ids.push_back(static_cast<int>(2 + rng.below(vocab - 2)));
  return s;
}

inline bool pad_row(const NamedParameter& p, std::size_t index, std::size_t dim) {
  return p.name == "embedding" && index < dim;
}

}  // namespace detail

/// Finite-difference audit of the annotator, detector and policy network on
/// small random inputs with the production layer shapes.
inline std::vector<GradAuditEntry> grad_audit(const GradAuditConfig& cfg, std::uint64_t seed) {
  std::vector<GradAuditEntry> out;
  Rng rng = make_stream(seed, "grad-audit");
  ExtractorConfig ecfg;
  ecfg.embedding_dim = cfg.embedding_dim;
  const auto skip = [&](const NamedParameter& p, std::size_t i) { return detail::pad_row(p, i, cfg.embedding_dim); };

  {
    Annotator model(EmbeddingTable::random(cfg.vocab_size, cfg.embedding_dim, rng), ecfg, rng);
    std::vector<LabeledReports> data;
    for (std::size_t e = 0; e < cfg.examples; ++e) {
      LabeledReports ex;
      const std::size_t n = 1 + rng.below(3);
      for (std::size_t r = 0; r < n; ++r)
        ex.reports.reports.push_back(detail::random_sequence(cfg.sequence_length, cfg.vocab_size, rng));
      ex.label = static_cast<int>(e % 2);
      data.push_back(std::move(ex));
    }
    const std::vector<std::size_t> batch = make_batches(data.size(), data.size(), rng).front();
    auto params = model.params();
    auto loss = [&](bool g) { return annotator_loss(model, data, batch, g); };
    out.push_back({"annotator", grad_check(loss, params, cfg.probes, rng, cfg.step, skip)});
  }
  {
    Detector model(EmbeddingTable::random(cfg.vocab_size, cfg.embedding_dim, rng), ecfg, rng);
    std::vector<Example> data;
    for (std::size_t e = 0; e < cfg.examples; ++e)
      data.push_back({detail::random_sequence(cfg.sequence_length, cfg.vocab_size, rng), static_cast<int>(e % 2)});
    std::vector<std::size_t> batch(data.size());
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
    auto params = model.params();
    auto loss = [&](bool g) { return detector_bce(model, data, batch, 1.0, g); };
    out.push_back({"detector", grad_check(loss, params, cfg.probes, rng, cfg.step, skip)});
  }
  {
    PolicyParams theta = PolicyParams::random(rng);
    std::vector<std::pair<std::array<double, kStateDim>, int>> steps;
    for (std::size_t e = 0; e < 3 * cfg.examples; ++e) {
      std::array<double, kStateDim> s{};
      for (auto& v : s) v = rng.uniform();
      steps.push_back({s, static_cast<int>(rng.below(2))});
    }
    auto params = theta.params();
    // Objective: sum of log pi(s, a) over the steps, i.e. the REINFORCE direction with R = 1.
    auto loss = [&](bool g) {
      double total = 0.0;
      for (const auto& [s, a] : steps) {
        total += std::log(policy_action_prob(policy_prob(s, theta), a));
        if (g) accumulate_log_policy_grad(s, a, theta, 1.0);
      }
      return total;
    };
    out.push_back({"policy", grad_check(loss, params, cfg.probes, rng, cfg.step)});
  }
  return out;
}

}  // namespace wefend
