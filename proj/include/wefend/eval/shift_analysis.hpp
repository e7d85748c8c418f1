#pragma once

#include <iomanip>
#include <sstream>
#include <string>

#include "wefend/eval/experiment.hpp"

namespace wefend {

/// Accuracies of a content detector and a report annotator trained on the
/// same-window training split, measured on a held-out same-window split and on
/// a later-window split.
struct ShiftReport {
  double content_same = 0.0;
  double content_different = 0.0;
  double annotator_same = 0.0;
  double annotator_different = 0.0;

  double content_gap() const { return content_same - content_different; }
  double annotator_gap() const { return annotator_same - annotator_different; }
};

struct ShiftConfig {
  std::size_t detector_epochs = 100;
  std::size_t annotator_epochs = 100;
  std::size_t batch_size = kDefaultBatchSize;
  double learning_rate = 1e-4;
  double validation_fraction = 0.1;
};

/// Train both models on `train` (content and reports respectively) and score
/// them on `same_time` and `different_time`. Checkpoints are chosen on a
/// `validation_fraction` slice of `train`, never on the evaluation splits.
inline ShiftReport shift_analysis(const std::vector<EncodedDoc>& train, const std::vector<EncodedDoc>& same_time,
                                  const std::vector<EncodedDoc>& different_time, const EmbeddingTable& embedding,
                                  const ExtractorConfig& ecfg, const ShiftConfig& cfg, std::uint64_t seed) {
  ShiftReport r;
  Rng split_rng = make_stream(seed, "shift-validation");
  const auto [fit_idx, val_idx] = split_indices(train.size(), cfg.validation_fraction, split_rng);
  std::vector<EncodedDoc> fit, val;
  for (auto i : fit_idx) fit.push_back(train[i]);
  for (auto i : val_idx) val.push_back(train[i]);
  {
    Rng init = make_stream(seed, "shift-detector-init");
    Rng rng = make_stream(seed, "shift-detector-train");
    Rng unused = make_stream(seed, "shift-selector");
    DetectorTrainConfig dcfg;
    dcfg.epochs = cfg.detector_epochs;
    dcfg.batch_size = cfg.batch_size;
    dcfg.adam.learning_rate = cfg.learning_rate;
    const auto tr = content_examples(fit);
    const auto va = content_examples(val);
    DetectorTrainData data;
    data.labeled = tr;
    data.validation = va;
    auto res = train_detector(Detector(embedding, ecfg, init), data, TrainingMode::supervised, dcfg, rng, unused);
    const auto s = content_examples(same_time);
    const auto d = content_examples(different_time);
    r.content_same = detector_accuracy(res.model, s);
    r.content_different = detector_accuracy(res.model, d);
  }
  {
    Rng init = make_stream(seed, "shift-annotator-init");
    Rng rng = make_stream(seed, "shift-annotator-train");
    AnnotatorTrainConfig acfg;
    acfg.epochs = cfg.annotator_epochs;
    acfg.batch_size = cfg.batch_size;
    acfg.adam.learning_rate = cfg.learning_rate;
    auto res = train_annotator(Annotator(embedding, ecfg, init), report_examples(fit), report_examples(val), acfg,
                               rng);
    r.annotator_same = annotator_accuracy(res.model, report_examples(same_time));
    r.annotator_different = annotator_accuracy(res.model, report_examples(different_time));
  }
  return r;
}

/// Shift analysis on one seed of an experiment config: the labeled training
/// window is split 80/20 into the training and same-time sets, the later-window
/// test set serves as the different-time set.
inline ShiftReport run_shift_analysis(const ExperimentConfig& cfg, std::uint64_t seed) {
  const SyntheticCorpus corpus = load_corpus(cfg.corpus, seed);
  const Vocabulary vocab = build_vocab(corpus_texts({&corpus.train, &corpus.unlabeled}), cfg.min_count);
  Rng emb_rng = make_stream(seed, "embedding");
  const EmbeddingTable emb = initial_embedding(cfg, vocab, emb_rng);
  const auto docs = encode_all(corpus.train, vocab, cfg.encoding);
  Rng split_rng = make_stream(seed, "shift-split");
  const auto [tr_idx, same_idx] = split_indices(docs.size(), 0.2, split_rng);
  std::vector<EncodedDoc> tr, same;
  for (auto i : tr_idx) tr.push_back(docs[i]);
  for (auto i : same_idx) same.push_back(docs[i]);
  ShiftConfig sc;
  sc.detector_epochs = cfg.detector_epochs;
  sc.annotator_epochs = cfg.annotator_epochs;
  sc.batch_size = cfg.batch_size;
  sc.learning_rate = cfg.learning_rate;
  return shift_analysis(tr, same, encode_all(corpus.test, vocab, cfg.encoding), emb, cfg.extractor, sc, seed);
}

inline std::string format_shift(const ShiftReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "model,same_time,different_time,gap\n";
  os << "content," << r.content_same << ',' << r.content_different << ',' << r.content_gap() << '\n';
  os << "annotator," << r.annotator_same << ',' << r.annotator_different << ',' << r.annotator_gap() << '\n';
  return os.str();
}

}  // namespace wefend
