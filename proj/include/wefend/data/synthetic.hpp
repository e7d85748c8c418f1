#pragma once

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "wefend/data/dataset.hpp"
#include "wefend/errors.hpp"
#include "wefend/nn/rng.hpp"

namespace wefend {

/// Knobs of the synthetic two-window corpus.
///
/// Content: each headline carries 1-3 class-specific topic tokens in a sea of
/// shared background words. Between the training window and the later window
/// (test + unlabeled) a `drift_strength` fraction of every class's topic
/// inventory is replaced by tokens never seen earlier.
///
/// Reports: each report carries label cues drawn from a time-invariant
/// inventory keyed to the true label; with probability `report_noise` a
/// report's cues come from the opposite class instead.
struct SynthConfig {
  std::size_t n_train_fake = 1000;
  std::size_t n_train_real = 1000;
  std::size_t n_test_fake = 500;
  std::size_t n_test_real = 500;
  std::size_t n_unlabeled = 10000;
  double unlabeled_fake_fraction = 0.5;

  std::size_t vocab_size = 2000;  // background words, shared by content and reports
  std::size_t doc_len = 12;
  std::size_t report_len = 8;
  std::size_t topic_tokens_per_class = 40;
  std::size_t cue_tokens_per_class = 20;
  std::size_t min_signal = 1;  // topic tokens per headline, uniform in [min, max]
  std::size_t max_signal = 3;
  double content_confusion = 0.15;  // chance one topic token comes from the other class

  double drift_strength = 0.5;
  double report_noise = 0.1;
  double reports_per_doc_mean = 1.4;  // reports ~ 1 + Poisson(mean - 1)
  std::uint64_t seed = 1;

  std::int64_t train_start = 1520000000;  // training window
  std::int64_t cutoff = 1536000000;       // later window starts here
  std::int64_t end = 1540000000;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(drift_strength) || !prob(report_noise) || !prob(content_confusion) || !prob(unlabeled_fake_fraction))
      throw ConfigError("synthetic: probabilities must lie in [0, 1]");
    if (reports_per_doc_mean < 1.0) throw ConfigError("synthetic: reports_per_doc_mean must be >= 1");
    if (min_signal == 0 || min_signal > max_signal || max_signal > doc_len)
      throw ConfigError("synthetic: need 1 <= min_signal <= max_signal <= doc_len");
    if (vocab_size == 0 || topic_tokens_per_class == 0 || cue_tokens_per_class == 0 || report_len < 2)
      throw ConfigError("synthetic: inventories must be non-empty and report_len >= 2");
    if (!(train_start < cutoff && cutoff < end)) throw ConfigError("synthetic: need train_start < cutoff < end");
  }
};

struct SyntheticCorpus {
  Dataset train;      // labeled, training window
  Dataset test;       // labeled, later window
  Dataset unlabeled;  // later window, labels withheld
  std::vector<std::pair<std::string, int>> unlabeled_truth;
};

/// Token inventories of the generator, exposed so tests can audit its output.
struct SynthInventory {
  static std::string background(std::size_t i) { return "w" + std::to_string(i); }
  static std::string class_tag(int label) { return label == 1 ? "f" : "r"; }
  /// Topic token i of a class in a window. Indices below the drifted count are
  /// replaced ("n" variants) in the later window.
  static std::string topic(int label, std::size_t i, bool later_window, std::size_t drifted) {
    const bool fresh = later_window && i < drifted;
    return "t" + class_tag(label) + (fresh ? "n" : "o") + std::to_string(i);
  }
  static std::string cue(int label, std::size_t i) { return "c" + class_tag(label) + std::to_string(i); }
  static bool is_cue(const std::string& tok) { return tok.size() > 2 && tok[0] == 'c' && (tok[1] == 'f' || tok[1] == 'r'); }
  static int cue_label(const std::string& tok) { return tok[1] == 'f' ? 1 : 0; }
};

namespace detail {

inline std::size_t drifted_count(const SynthConfig& cfg) {
  return static_cast<std::size_t>(std::llround(cfg.drift_strength * static_cast<double>(cfg.topic_tokens_per_class)));
}

inline std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

inline std::string make_headline(int label, bool later, const SynthConfig& cfg, Rng& rng) {
  const std::size_t drifted = drifted_count(cfg);
  const std::size_t n_signal = cfg.min_signal + rng.below(cfg.max_signal - cfg.min_signal + 1);
  std::vector<std::string> toks;
  toks.reserve(cfg.doc_len);
  for (std::size_t i = 0; i < n_signal; ++i)
    toks.push_back(SynthInventory::topic(label, rng.below(cfg.topic_tokens_per_class), later, drifted));
  if (rng.bernoulli(cfg.content_confusion))
    toks[0] = SynthInventory::topic(1 - label, rng.below(cfg.topic_tokens_per_class), later, drifted);
  while (toks.size() < cfg.doc_len) toks.push_back(SynthInventory::background(rng.below(cfg.vocab_size)));
  rng.shuffle(toks);
  return join(toks);
}

inline std::string make_report(int label, const SynthConfig& cfg, Rng& rng) {
  const int cue_class = rng.bernoulli(cfg.report_noise) ? 1 - label : label;
  const std::size_t n_cues = 1 + rng.below(2);
  std::vector<std::string> toks;
  for (std::size_t i = 0; i < n_cues; ++i)
    toks.push_back(SynthInventory::cue(cue_class, rng.below(cfg.cue_tokens_per_class)));
  while (toks.size() < cfg.report_len) toks.push_back(SynthInventory::background(rng.below(cfg.vocab_size)));
  rng.shuffle(toks);
  return join(toks);
}

inline std::string make_id(const std::string& prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << '-' << std::setw(6) << std::setfill('0') << i;
  return os.str();
}

inline Document make_document(const std::string& id, int label, bool later, const SynthConfig& cfg, Rng& rng) {
  Document d;
  d.id = id;
  d.text = make_headline(label, later, cfg, rng);
  const std::size_t n_reports = 1 + static_cast<std::size_t>(rng.poisson(cfg.reports_per_doc_mean - 1.0));
  for (std::size_t r = 0; r < n_reports; ++r) d.reports.push_back(make_report(label, cfg, rng));
  const std::int64_t lo = later ? cfg.cutoff : cfg.train_start;
  const std::int64_t hi = later ? cfg.end : cfg.cutoff;
  d.timestamp = lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo)));
  d.label = label;
  return d;
}

}  // namespace detail

/// Generate (train, test, unlabeled) deterministically from `cfg` (seed included).
/// Unlabeled ground truth goes to `unlabeled_truth` only, never into the documents.
inline SyntheticCorpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = make_stream(cfg.seed, "synthetic");
  SyntheticCorpus out;

  auto labeled = [&](const std::string& prefix, std::size_t n_fake, std::size_t n_real, bool later) {
    Dataset ds;
    ds.name = prefix;
    std::vector<int> labels(n_fake, 1);
    labels.insert(labels.end(), n_real, 0);
    rng.shuffle(labels);
    for (std::size_t i = 0; i < labels.size(); ++i)
      ds.documents.push_back(detail::make_document(detail::make_id(prefix, i), labels[i], later, cfg, rng));
    return ds;
  };
  out.train = labeled("train", cfg.n_train_fake, cfg.n_train_real, false);
  out.test = labeled("test", cfg.n_test_fake, cfg.n_test_real, true);

  out.unlabeled.name = "unlabeled";
  for (std::size_t i = 0; i < cfg.n_unlabeled; ++i) {
    const int label = rng.bernoulli(cfg.unlabeled_fake_fraction) ? 1 : 0;
    Document d = detail::make_document(detail::make_id("unl", i), label, true, cfg, rng);
    d.label.reset();
    out.unlabeled_truth.emplace_back(d.id, label);
    out.unlabeled.documents.push_back(std::move(d));
  }
  return out;
}

}  // namespace wefend
