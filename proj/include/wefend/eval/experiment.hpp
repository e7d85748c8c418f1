#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wefend/data/dataset.hpp"
#include "wefend/data/synthetic.hpp"
#include "wefend/eval/metrics.hpp"
#include "wefend/model/annotator.hpp"
#include "wefend/model/train_detector.hpp"
#include "wefend/text/embedding.hpp"

namespace wefend {

/// Where the corpus comes from: generated per seed, or three files on disk.
struct CorpusSource {
  std::optional<SynthConfig> synthetic;
  std::string train_path, test_path, unlabeled_path, truth_path;
  FieldMap fields{};
};

inline CorpusSource default_corpus() {
  CorpusSource c;
  c.synthetic = SynthConfig{};
  return c;
}

struct ExperimentConfig {
  std::vector<TrainingMode> modes{TrainingMode::supervised};
  std::vector<std::uint64_t> seeds{1};
  CorpusSource corpus = default_corpus();

  EncodingConfig encoding{};
  ExtractorConfig extractor{};
  std::size_t min_count = 1;
  std::string embeddings_path;  // empty: random initialisation

  std::size_t annotator_epochs = 100;
  std::size_t detector_epochs = 100;
  std::size_t batch_size = kDefaultBatchSize;
  double learning_rate = 1e-4;
  LossWeights weights{};
  SelectorConfig selector{};
  std::size_t selector_refresh = 1;

  double labeled_validation_fraction = 0.2;
  double weak_validation_fraction = 0.1;

  void validate() const {
    if (seeds.empty()) throw ConfigError("experiment: at least one seed required");
    if (modes.empty()) throw ConfigError("experiment: at least one mode required");
    if (!corpus.synthetic && (corpus.train_path.empty() || corpus.test_path.empty()))
      throw ConfigError("experiment: need a synthetic config or train/test dataset paths");
    if (!(labeled_validation_fraction > 0.0 && labeled_validation_fraction < 1.0))
      throw ConfigError("experiment: labeled validation fraction must lie in (0, 1)");
  }
};

/// Outcome of one (mode, seed) run.
struct RunResult {
  TrainingMode mode{};
  std::uint64_t seed = 0;
  MetricsReport test;
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> history;
  std::optional<double> weak_label_accuracy;       // all weak training samples vs truth
  std::optional<double> selected_label_accuracy;   // mean over selector refreshes vs truth
  std::size_t weak_count = 0;
};

/// Encoded splits, embedding and (optionally) weak labels shared by every mode of one seed.
struct SeedContext {
  Vocabulary vocab;
  EmbeddingTable initial_embedding;
  std::vector<EncodedDoc> train_docs, validation_docs, test_docs, unlabeled_docs;
  std::vector<Example> train, validation, test;
  std::vector<TokenSequence> unlabeled_content;
  std::map<std::string, int> unlabeled_truth;

  std::vector<WeakCandidate> weak_train;
  std::vector<Example> weak_validation;
  std::vector<int> weak_train_truth;  // empty when no ground truth is available
  std::optional<Annotator> annotator;
  std::size_t skipped_without_reports = 0;
};

struct AnnotationResult {
  std::vector<WeakLabel> labels;
  std::vector<std::size_t> doc_index;  // position of each label's document in the input
  std::size_t skipped = 0;             // documents without reports
};

/// Weak labels for every document that has at least one report.
inline AnnotationResult annotate(const Annotator& model, const std::vector<EncodedDoc>& docs) {
  AnnotationResult out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (docs[i].reports.reports.empty()) {
      ++out.skipped;
      continue;
    }
    out.labels.push_back(annotate_one(model, docs[i].reports));
    out.doc_index.push_back(i);
  }
  return out;
}

inline SyntheticCorpus load_corpus(const CorpusSource& src, std::uint64_t seed) {
  if (src.synthetic) {
    SynthConfig sc = *src.synthetic;
    sc.seed = derive_seed(seed, "corpus");
    return generate_synthetic(sc);
  }
  SyntheticCorpus c;
  c.train = load_dataset(src.train_path, src.fields);
  c.test = load_dataset(src.test_path, src.fields);
  if (!src.unlabeled_path.empty()) c.unlabeled = load_dataset(src.unlabeled_path, src.fields);
  if (!src.truth_path.empty()) {
    const auto truth = load_truth(src.truth_path);
    for (const auto& d : c.unlabeled.documents) {
      auto it = truth.find(d.id);
      if (it != truth.end()) c.unlabeled_truth.emplace_back(d.id, it->second);
    }
  }
  return c;
}

/// Random index split into (first, second) with `fraction` of items in second.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double fraction,
                                                                                   Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const auto n_second = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> second(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_second));
  std::vector<std::size_t> first(order.begin() + static_cast<std::ptrdiff_t>(n_second), order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {first, second};
}

inline EmbeddingTable initial_embedding(const ExperimentConfig& cfg, const Vocabulary& vocab, Rng& rng) {
  if (!cfg.embeddings_path.empty())
    return load_embeddings(cfg.embeddings_path, vocab, cfg.extractor.embedding_dim, rng).table;
  return EmbeddingTable::random(vocab.size(), cfg.extractor.embedding_dim, rng);
}

/// Vocabulary, embedding and encoded splits of one seed. The labeled training
/// set is split into fit / validation by `labeled_validation_fraction`.
/// Pass `vocab` to reuse an existing vocabulary instead of building one.
inline SeedContext prepare_context(const ExperimentConfig& cfg, const SyntheticCorpus& corpus, std::uint64_t seed,
                                   const Vocabulary* vocab = nullptr) {
  SeedContext ctx;
  ctx.vocab = vocab ? *vocab : build_vocab(corpus_texts({&corpus.train, &corpus.unlabeled}), cfg.min_count);
  Rng emb_rng = make_stream(seed, "embedding");
  ctx.initial_embedding = initial_embedding(cfg, ctx.vocab, emb_rng);

  const auto train_docs = encode_all(corpus.train, ctx.vocab, cfg.encoding);
  Rng split_rng = make_stream(seed, "labeled-split");
  const auto [tr_idx, va_idx] = split_indices(train_docs.size(), cfg.labeled_validation_fraction, split_rng);
  for (auto i : tr_idx) ctx.train_docs.push_back(train_docs[i]);
  for (auto i : va_idx) ctx.validation_docs.push_back(train_docs[i]);
  ctx.test_docs = encode_all(corpus.test, ctx.vocab, cfg.encoding);
  ctx.unlabeled_docs = encode_all(corpus.unlabeled, ctx.vocab, cfg.encoding);

  ctx.train = content_examples(ctx.train_docs);
  ctx.validation = content_examples(ctx.validation_docs);
  ctx.test = content_examples(ctx.test_docs);
  for (const auto& d : ctx.unlabeled_docs) ctx.unlabeled_content.push_back(d.content);
  ctx.unlabeled_truth.insert(corpus.unlabeled_truth.begin(), corpus.unlabeled_truth.end());
  return ctx;
}

inline AnnotatorTrainResult train_context_annotator(const ExperimentConfig& cfg, const SeedContext& ctx,
                                                    std::uint64_t seed) {
  Rng ann_init = make_stream(seed, "annotator-init");
  Rng ann_train = make_stream(seed, "annotator-train");
  AnnotatorTrainConfig acfg;
  acfg.epochs = cfg.annotator_epochs;
  acfg.batch_size = cfg.batch_size;
  acfg.adam.learning_rate = cfg.learning_rate;
  return train_annotator(Annotator(ctx.initial_embedding, cfg.extractor, ann_init), report_examples(ctx.train_docs),
                         report_examples(ctx.validation_docs), acfg, ann_train);
}

/// Turn weak labels over `ctx.unlabeled_docs` into the weak training set and a
/// held-out weak validation set (weak_validation_fraction of all weak labels,
/// split evenly between the two weak classes).
inline void attach_weak_labels(const ExperimentConfig& cfg, SeedContext& ctx, const AnnotationResult& ann,
                               std::uint64_t seed) {
  ctx.skipped_without_reports = ann.skipped;
  ctx.weak_train.clear();
  ctx.weak_validation.clear();
  ctx.weak_train_truth.clear();
  const bool have_truth = !ctx.unlabeled_truth.empty();

  std::vector<std::size_t> by_class[2];
  for (std::size_t k = 0; k < ann.labels.size(); ++k) by_class[ann.labels[k].label].push_back(k);
  Rng weak_rng = make_stream(seed, "weak-split");
  std::vector<char> held(ann.labels.size(), 0);
  const auto per_class = static_cast<std::size_t>(
      std::llround(cfg.weak_validation_fraction * static_cast<double>(ann.labels.size()) / 2.0));
  for (auto& cls : by_class) {
    weak_rng.shuffle(cls);
    for (std::size_t i = 0; i < std::min(per_class, cls.size()); ++i) held[cls[i]] = 1;
  }
  for (std::size_t k = 0; k < ann.labels.size(); ++k) {
    const auto& doc = ctx.unlabeled_docs[ann.doc_index[k]];
    if (held[k]) {
      ctx.weak_validation.push_back({doc.content, ann.labels[k].label});
      continue;
    }
    ctx.weak_train.push_back({doc.id, doc.content, ann.labels[k].label, ann.labels[k].confidence});
    if (have_truth) {
      auto it = ctx.unlabeled_truth.find(doc.id);
      if (it == ctx.unlabeled_truth.end()) throw IntegrityError("truth file lacks unlabeled id '" + doc.id + "'");
      ctx.weak_train_truth.push_back(it->second);
    }
  }
}

/// Everything up to (and including) weak labelling for one seed.
inline SeedContext prepare_seed(const ExperimentConfig& cfg, std::uint64_t seed, bool need_annotator) {
  const SyntheticCorpus corpus = load_corpus(cfg.corpus, seed);
  SeedContext ctx = prepare_context(cfg, corpus, seed);
  if (!need_annotator) return ctx;
  ctx.annotator = train_context_annotator(cfg, ctx, seed).model;
  attach_weak_labels(cfg, ctx, annotate(*ctx.annotator, ctx.unlabeled_docs), seed);
  return ctx;
}

inline double label_accuracy(const std::vector<WeakCandidate>& weak, const std::vector<int>& truth) {
  if (weak.empty() || truth.size() != weak.size()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < weak.size(); ++i) ok += weak[i].weak_label == truth[i];
  return static_cast<double>(ok) / static_cast<double>(weak.size());
}

/// Train and evaluate one mode on a prepared seed.
inline RunResult run_mode(const ExperimentConfig& cfg, const SeedContext& ctx, TrainingMode mode, std::uint64_t seed) {
  Rng init_rng = make_stream(seed, "detector-init");
  Rng train_rng = make_stream(seed, "detector-train");
  Rng sel_rng = make_stream(seed, "selector");
  Rng policy_rng = make_stream(seed, "policy-init");

  Detector det(ctx.initial_embedding, cfg.extractor, init_rng);
  DetectorTrainConfig dcfg;
  dcfg.epochs = cfg.detector_epochs;
  dcfg.batch_size = cfg.batch_size;
  dcfg.adam.learning_rate = cfg.learning_rate;
  dcfg.weights = cfg.weights;
  dcfg.selector = cfg.selector;
  dcfg.selector_refresh = cfg.selector_refresh;

  DetectorTrainData data;
  data.test = ctx.test;
  data.reward_validation = ctx.validation;
  if (mode_needs_weak(mode)) {
    data.weak = ctx.weak_train;
    data.validation = ctx.weak_validation;
    data.weak_truth = ctx.weak_train_truth;
  } else {
    data.validation = ctx.validation;
  }
  if (mode_needs_labeled(mode)) data.labeled = ctx.train;
  if (mode == TrainingMode::semi_supervised) data.unlabeled = ctx.unlabeled_content;

  std::optional<ReinforcedSelector> selector;
  if (mode == TrainingMode::wefend) selector.emplace(cfg.selector, policy_rng);

  auto trained = train_detector(std::move(det), data, mode, dcfg, train_rng, sel_rng, selector ? &*selector : nullptr);

  RunResult r;
  r.mode = mode;
  r.seed = seed;
  r.test = evaluate_detector(trained.model, ctx.test);
  r.best_epoch = trained.best_epoch;
  r.history = std::move(trained.history);
  r.weak_count = ctx.weak_train.size();
  if (mode_needs_weak(mode) && !ctx.weak_train_truth.empty()) {
    r.weak_label_accuracy = label_accuracy(ctx.weak_train, ctx.weak_train_truth);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& h : r.history)
      if (h.epoch > 0 && h.selected_label_accuracy) {
        sum += *h.selected_label_accuracy;
        ++n;
      }
    if (n) r.selected_label_accuracy = sum / static_cast<double>(n);
  }
  return r;
}

inline std::vector<RunResult> run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  bool need_annotator = false;
  for (auto m : cfg.modes) need_annotator = need_annotator || mode_needs_weak(m);
  const SeedContext ctx = prepare_seed(cfg, seed, need_annotator);
  std::vector<RunResult> out;
  for (auto m : cfg.modes) out.push_back(run_mode(cfg, ctx, m, seed));
  return out;
}

inline std::vector<RunResult> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<RunResult> out;
  for (auto seed : cfg.seeds) {
    auto runs = run_seed(cfg, seed);
    out.insert(out.end(), runs.begin(), runs.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and output
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1); 0 for one value
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  m.n = xs.size();
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"accuracy",       "auc_roc",     "precision_fake", "recall_fake",
                                             "f1_fake",        "precision_real", "recall_real",  "f1_real"};
  return cols;
}

inline std::vector<double> metric_values(const MetricsReport& m) {
  return {m.accuracy,     m.auc_roc.value_or(std::nan("")), m.fake.precision, m.fake.recall, m.fake.f1,
          m.real.precision, m.real.recall,                  m.real.f1};
}

struct ComparisonRow {
  TrainingMode mode{};
  std::vector<MeanStd> metrics;  // aligned with metric_columns()
};

inline std::vector<ComparisonRow> summarize(const std::vector<RunResult>& runs, const std::vector<TrainingMode>& modes) {
  std::vector<ComparisonRow> rows;
  for (auto mode : modes) {
    ComparisonRow row{mode, {}};
    for (std::size_t c = 0; c < metric_columns().size(); ++c) {
      std::vector<double> xs;
      for (const auto& r : runs)
        if (r.mode == mode) xs.push_back(metric_values(r.test)[c]);
      row.metrics.push_back(mean_std(xs));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string format_table(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "method";
  for (const auto& c : metric_columns()) os << std::right << std::setw(18) << c;
  os << '\n';
  os << std::fixed << std::setprecision(3);
  for (const auto& r : rows) {
    os << std::left << std::setw(20) << mode_name(r.mode);
    for (const auto& m : r.metrics) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(3) << m.mean << " +- " << m.stddev;
      os << std::right << std::setw(18) << cell.str();
    }
    os << '\n';
  }
  return os.str();
}

inline std::string format_table_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "method,runs";
  for (const auto& c : metric_columns()) os << ',' << c << "_mean," << c << "_std";
  os << '\n' << std::fixed << std::setprecision(6);
  for (const auto& r : rows) {
    os << mode_name(r.mode) << ',' << (r.metrics.empty() ? 0 : r.metrics[0].n);
    for (const auto& m : r.metrics) os << ',' << m.mean << ',' << m.stddev;
    os << '\n';
  }
  return os.str();
}

inline void write_metrics_row(std::ostream& os, std::size_t epoch, const std::string& split, const MetricsReport& m) {
  os << epoch << ',' << split;
  for (double v : metric_values(m)) {
    os << ',';
    if (std::isnan(v))
      os << "NA";
    else
      os << v;
  }
  os << '\n';
}

/// Per-epoch metrics CSV: epoch, split, accuracy, auc, precision/recall/f1 for fake then real.
inline std::string format_history_csv(const std::vector<EpochMetrics>& history) {
  std::ostringstream os;
  os << "epoch,split,accuracy,auc,precision_fake,recall_fake,f1_fake,precision_real,recall_real,f1_real\n";
  os << std::fixed << std::setprecision(6);
  for (const auto& h : history) {
    write_metrics_row(os, h.epoch, "validation", h.validation);
    if (h.test) write_metrics_row(os, h.epoch, "test", *h.test);
  }
  return os.str();
}

/// Accuracy-vs-epoch curves across runs, long format: mode, seed, epoch, test_accuracy, validation_accuracy.
inline std::string format_curves_csv(const std::vector<RunResult>& runs) {
  std::ostringstream os;
  os << "mode,seed,epoch,test_accuracy,validation_accuracy,selected\n" << std::fixed << std::setprecision(6);
  for (const auto& r : runs)
    for (const auto& h : r.history)
      os << mode_name(r.mode) << ',' << r.seed << ',' << h.epoch << ',' << (h.test ? h.test->accuracy : 0.0) << ','
         << h.validation.accuracy << ',' << h.selected << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Result files: one JSON document per seed, folded together by the caller.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> json_optional(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const ClassMetrics& m) { j = {m.precision, m.recall, m.f1}; }
inline void from_json(const nlohmann::json& j, ClassMetrics& m) {
  m = {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline void to_json(nlohmann::json& j, const MetricsReport& m) {
  j = {{"accuracy", m.accuracy},
       {"auc_roc", detail::optional_json(m.auc_roc)},
       {"fake", m.fake},
       {"real", m.real},
       {"confusion", {m.confusion.tp, m.confusion.fp, m.confusion.tn, m.confusion.fn}}};
}
inline void from_json(const nlohmann::json& j, MetricsReport& m) {
  m.accuracy = j.at("accuracy").get<double>();
  m.auc_roc = detail::json_optional<double>(j.at("auc_roc"));
  m.fake = j.at("fake").get<ClassMetrics>();
  m.real = j.at("real").get<ClassMetrics>();
  const auto& c = j.at("confusion");
  m.confusion = {c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(), c.at(2).get<std::size_t>(),
                 c.at(3).get<std::size_t>()};
}

inline void to_json(nlohmann::json& j, const EpochMetrics& m) {
  j = {{"epoch", m.epoch},
       {"train_loss", m.train_loss},
       {"validation", m.validation},
       {"test", detail::optional_json(m.test)},
       {"selected", m.selected},
       {"selected_label_accuracy", detail::optional_json(m.selected_label_accuracy)}};
}
inline void from_json(const nlohmann::json& j, EpochMetrics& m) {
  m.epoch = j.at("epoch").get<std::size_t>();
  m.train_loss = j.at("train_loss").get<double>();
  m.validation = j.at("validation").get<MetricsReport>();
  m.test = detail::json_optional<MetricsReport>(j.at("test"));
  m.selected = j.at("selected").get<std::size_t>();
  m.selected_label_accuracy = detail::json_optional<double>(j.at("selected_label_accuracy"));
}

inline void to_json(nlohmann::json& j, const RunResult& r) {
  j = {{"mode", mode_name(r.mode)},
       {"seed", r.seed},
       {"test", r.test},
       {"best_epoch", r.best_epoch},
       {"history", r.history},
       {"weak_label_accuracy", detail::optional_json(r.weak_label_accuracy)},
       {"selected_label_accuracy", detail::optional_json(r.selected_label_accuracy)},
       {"weak_count", r.weak_count}};
}
inline void from_json(const nlohmann::json& j, RunResult& r) {
  r.mode = parse_mode(j.at("mode").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.test = j.at("test").get<MetricsReport>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.history = j.at("history").get<std::vector<EpochMetrics>>();
  r.weak_label_accuracy = detail::json_optional<double>(j.at("weak_label_accuracy"));
  r.selected_label_accuracy = detail::json_optional<double>(j.at("selected_label_accuracy"));
  r.weak_count = j.at("weak_count").get<std::size_t>();
}

inline void save_runs(const std::string& path, const std::vector<RunResult>& runs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << nlohmann::json(runs).dump(1) << '\n';
}

inline std::vector<RunResult> load_runs(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  return nlohmann::json::parse(is).get<std::vector<RunResult>>();
}

/// Per-run summary: one line per (mode, seed) with test metrics and weak-label audit columns.
inline std::string format_runs_csv(const std::vector<RunResult>& runs) {
  std::ostringstream os;
  os << "mode,seed,best_epoch";
  for (const auto& c : metric_columns()) os << ',' << c;
  os << ",weak_count,weak_label_accuracy,selected_label_accuracy\n" << std::fixed << std::setprecision(6);
  auto opt = [&](const std::optional<double>& v) {
    if (v)
      os << *v;
    else
      os << "NA";
  };
  for (const auto& r : runs) {
    os << mode_name(r.mode) << ',' << r.seed << ',' << r.best_epoch;
    for (double v : metric_values(r.test)) {
      os << ',';
      opt(std::isnan(v) ? std::nullopt : std::optional<double>(v));
    }
    os << ',' << r.weak_count << ',';
    opt(r.weak_label_accuracy);
    os << ',';
    opt(r.selected_label_accuracy);
    os << '\n';
  }
  return os.str();
}

}  // namespace wefend
