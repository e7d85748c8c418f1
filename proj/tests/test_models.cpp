#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_util.hpp"

using namespace wefend;
using wefend::testing::random_tokens;
using wefend::testing::small_extractor;

namespace {

EmbeddingTable zero_pad_table(std::size_t vocab, std::size_t dim, Rng& rng) { return EmbeddingTable::random(vocab, dim, rng); }

// Sequences whose first token is a class marker: id 2 for fake, 3 for real.
std::vector<Example> separable_examples(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex{random_tokens(8, vocab, rng), static_cast<int>(i % 2)};
    for (auto& id : ex.tokens.ids)
      if (id == 2 || id == 3) id = 4;
    ex.tokens.ids[0] = ex.label ? 2 : 3;
    out.push_back(ex);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- extractor

TEST(Extractor, AllPadGivesZeroVector) {
  Rng rng(1);
  const auto emb = zero_pad_table(10, 6, rng);
  TextCnn cnn(small_extractor(), rng);
  const auto out = cnn.features(TokenSequence{std::vector<int>(8, kPadId)}, emb);
  ASSERT_EQ(out.size(), 40u);
  EXPECT_TRUE(std::all_of(out.begin(), out.end(), [](double v) { return v == 0.0; }));
}

TEST(Extractor, OutputWidthIndependentOfLength) {
  Rng rng(2);
  const auto emb = zero_pad_table(20, 6, rng);
  TextCnn cnn(small_extractor(), rng);
  for (std::size_t len : {6u, 15u, 30u}) EXPECT_EQ(cnn.features(random_tokens(len, 20, rng), emb).size(), 40u);
}

TEST(Extractor, ShortSequenceIsRejected) {
  Rng rng(2);
  const auto emb = zero_pad_table(20, 6, rng);
  TextCnn cnn(small_extractor(), rng);
  EXPECT_THROW(cnn.features(random_tokens(5, 20, rng), emb), DimensionError);
}

TEST(Extractor, BasisFilterPoolsMaxCoordinate) {
  Rng rng(3);
  ExtractorConfig cfg;
  cfg.window_sizes = {1};
  cfg.filters_per_window = 1;
  cfg.output_dim = 1;
  cfg.embedding_dim = 4;
  for (int trial = 0; trial < 20; ++trial) {
    const auto emb = EmbeddingTable::random(12, 4, rng);
    TextCnn cnn(cfg, rng);
    const std::size_t axis = rng.below(4);
    cnn.filters()[0].value.fill(0.0);
    cnn.filters()[0].value[axis] = 1.0;
    cnn.projection().value[0] = 1.0;
    const auto seq = random_tokens(9, 12, rng);
    double brute = 0.0;
    for (int id : seq.ids) brute = std::max(brute, emb.row(id)[axis]);
    EXPECT_EQ(cnn.features(seq, emb)[0], brute);
  }
}

// ---------------------------------------------------------------- annotator

TEST(Aggregate, SingleReportWithIdentityProjection) {
  Parameter w(Tensor({40, 20}));
  for (std::size_t i = 0; i < 20; ++i) w.value.at(i, i) = 1.0;
  std::vector<double> f(40);
  for (std::size_t i = 0; i < 40; ++i) f[i] = (i % 3 == 0 ? -1.0 : 1.0) * static_cast<double>(i);
  const auto h = aggregate_reports({f}, w);
  ASSERT_EQ(h.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(h[i], std::max(0.0, f[i]));
}

TEST(Aggregate, HandComputedTwoReportMean) {
  Parameter w(Tensor({40, 20}));
  for (std::size_t i = 0; i < 20; ++i) w.value.at(i, i) = 1.0;
  w.value.at(1, 5) = 2.0;  // h5 = 2 * mean[1]
  std::vector<double> a(40, 0.0), b(40, 0.0);
  a[0] = 2.0;
  b[1] = 2.0;
  const auto h = aggregate_reports({a, b}, w);
  EXPECT_EQ(h[0], 1.0);
  EXPECT_EQ(h[1], 1.0);
  EXPECT_EQ(h[5], 2.0);
  for (std::size_t i = 2; i < 20; ++i)
    if (i != 5) {
      EXPECT_EQ(h[i], 0.0);
    }
}

TEST(Aggregate, PermutationInvariantBitwise) {
  Rng rng(5);
  Parameter w = glorot_parameter(40, 20, rng);
  std::vector<std::vector<double>> feats(3, std::vector<double>(40));
  for (auto& f : feats)
    for (auto& v : f) v = rng.uniform(-1, 1) * 1e3 + rng.uniform();
  const auto ref = aggregate_reports(feats, w);
  std::vector<std::size_t> perm{0, 1, 2};
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::vector<std::vector<double>> p;
    for (auto i : perm) p.push_back(feats[i]);
    EXPECT_EQ(aggregate_reports(p, w), ref);
  }
}

TEST(Annotator, ZeroParametersPredictHalf) {
  Rng rng(6);
  Annotator model(EmbeddingTable::random(10, 6, rng), small_extractor(), rng);
  model.set_zero();
  EXPECT_EQ(model.predict(ReportSet{{random_tokens(8, 10, rng)}}), 0.5);
}

TEST(Annotator, DuplicatingReportsLeavesPredictionUnchanged) {
  Rng rng(7);
  Annotator model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  ReportSet rs{{random_tokens(8, 30, rng), random_tokens(8, 30, rng), random_tokens(8, 30, rng)}};
  ReportSet doubled = rs;
  for (const auto& r : rs.reports) doubled.reports.push_back(r);
  EXPECT_EQ(model.predict(rs), model.predict(doubled));
}

TEST(Annotator, EqualsStageComposition) {
  Rng rng(8);
  Annotator model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  ReportSet rs{{random_tokens(8, 30, rng), random_tokens(10, 30, rng)}};
  std::vector<std::vector<double>> feats;
  for (const auto& r : rs.reports) feats.push_back(model.extractor().features(r, model.embedding()));
  const auto h = aggregate_reports(feats, model.w_r());
  double logit = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) logit += h[j] * model.ann_fc().value[j];
  EXPECT_NEAR(model.predict(rs), 1.0 / (1.0 + std::exp(-logit)), 1e-15);
}

TEST(Annotator, EmptyReportSetIsRejected) {
  Rng rng(8);
  Annotator model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  EXPECT_THROW(model.predict(ReportSet{}), PreconditionError);
}

TEST(Annotator, GradientMatchesFiniteDifferences) {
  GradAuditConfig cfg;
  for (const auto& e : grad_audit(cfg, 3))
    if (e.model == "annotator") {
      EXPECT_LT(e.result.max_relative_error, 1e-4);
    }
}

namespace {
std::vector<LabeledReports> separable_reports(std::size_t n, Rng& rng) {
  std::vector<LabeledReports> out;
  for (const auto& ex : separable_examples(n, 30, rng)) out.push_back({ReportSet{{ex.tokens}}, ex.label});
  return out;
}
}  // namespace

TEST(TrainAnnotator, SeparableToyReachesPerfectTrainAccuracy) {
  Rng rng(9);
  const auto data = separable_reports(20, rng);
  Annotator model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  AnnotatorTrainConfig cfg;
  cfg.epochs = 50;
  cfg.adam.learning_rate = 1e-2;
  auto r = train_annotator(model, data, {}, cfg, rng);
  EXPECT_EQ(annotator_accuracy(r.model, data), 1.0);
}

TEST(TrainAnnotator, FirstEpochLowersLossAtDefaultRate) {
  Rng rng(10);
  const auto data = separable_reports(40, rng);
  Annotator model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  AnnotatorTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 40;
  auto r = train_annotator(model, data, {}, cfg, rng);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  EXPECT_LT(annotator_loss(r.model, data, all, false), r.initial_loss);
}

TEST(TrainAnnotator, SingleClassPushesPredictionsTowardIt) {
  Rng rng(11);
  auto data = separable_reports(20, rng);
  for (auto& d : data) d.label = 1;
  Annotator model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  AnnotatorTrainConfig cfg;
  cfg.epochs = 10;
  cfg.adam.learning_rate = 1e-2;
  auto r = train_annotator(model, data, {}, cfg, rng);
  for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i].train_loss, r.history[i - 1].train_loss + 1e-9);
  for (const auto& d : data) EXPECT_GT(r.model.predict(d.reports), 0.5);
}

TEST(TrainAnnotator, EmptyTrainingSetIsRejected) {
  Rng rng(1);
  Annotator model(EmbeddingTable::random(10, 6, rng), small_extractor(), rng);
  EXPECT_THROW(train_annotator(model, {}, {}, AnnotatorTrainConfig{}, rng), PreconditionError);
}

TEST(Annotate, TieGoesToReal) { EXPECT_EQ(decide(0.5), 0); EXPECT_EQ(decide(0.5000001), 1); }

TEST(Annotate, EmptyInputGivesEmptyOutput) {
  Rng rng(1);
  Annotator model(EmbeddingTable::random(10, 6, rng), small_extractor(), rng);
  const auto r = annotate(model, {});
  EXPECT_TRUE(r.labels.empty());
  EXPECT_EQ(r.skipped, 0u);
}

TEST(Annotate, SkipsAndCountsDocumentsWithoutReports) {
  Rng rng(1);
  Annotator model(EmbeddingTable::random(10, 6, rng), small_extractor(), rng);
  std::vector<EncodedDoc> docs(3);
  docs[0].reports.reports = {random_tokens(8, 10, rng)};
  docs[2].reports.reports = {random_tokens(8, 10, rng)};
  const auto r = annotate(model, docs);
  EXPECT_EQ(r.labels.size(), 2u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.doc_index, (std::vector<std::size_t>{0, 2}));
  for (const auto& l : r.labels) EXPECT_EQ(l.label, decide(l.confidence));
}

// ---------------------------------------------------------------- detector

TEST(Detector, ZeroParametersPredictHalf) {
  Rng rng(12);
  Detector model(EmbeddingTable::random(10, 6, rng), small_extractor(), rng);
  model.set_zero();
  EXPECT_EQ(model.predict(random_tokens(8, 10, rng)), 0.5);
}

TEST(Detector, AllPadInputPredictsHalf) {
  Rng rng(13);
  Detector model(EmbeddingTable::random(10, 6, rng), small_extractor(), rng);
  EXPECT_EQ(model.predict(TokenSequence{std::vector<int>(8, kPadId)}), 0.5);
}

TEST(Detector, EqualsStageComposition) {
  Rng rng(14);
  Detector model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  const auto seq = random_tokens(12, 30, rng);
  const auto h = model.extractor().features(seq, model.embedding());
  double logit = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) logit += h[j] * model.fake_fc().value[j];
  EXPECT_NEAR(model.predict(seq), 1.0 / (1.0 + std::exp(-logit)), 1e-15);
}

TEST(CombinedLoss, EmptySelectedBatchReducesToLabeledLoss) {
  Rng rng(15);
  Detector model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  const auto lab = separable_examples(3, 30, rng);
  const std::vector<std::size_t> b{0, 1, 2};
  EXPECT_EQ(combined_loss(model, lab, b, {}, {}, LossWeights{}, false), detector_bce(model, lab, b, 1.0, false));
}

TEST(CombinedLoss, IdenticalBatchesDoubleTheLoss) {
  Rng rng(16);
  Detector model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  const auto lab = separable_examples(3, 30, rng);
  const std::vector<std::size_t> b{0, 1, 2};
  EXPECT_EQ(combined_loss(model, lab, b, lab, b, LossWeights{}, false), 2.0 * detector_bce(model, lab, b, 1.0, false));
}

TEST(CombinedLoss, MatchesHandSummedPerSampleBce) {
  Rng rng(17);
  Detector model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  const auto lab = separable_examples(3, 30, rng);
  const auto sel = separable_examples(3, 30, rng);
  const std::vector<std::size_t> b{0, 1, 2};
  LossWeights w{0.7, 1.3, 0.1};
  auto mean_bce = [&](const std::vector<Example>& xs) {
    double s = 0.0;
    for (const auto& x : xs) {
      const double p = model.predict(x.tokens);
      s += -(x.label * std::log(p) + (1 - x.label) * std::log(1 - p));
    }
    return s / 3.0;
  };
  EXPECT_NEAR(combined_loss(model, lab, b, sel, b, w, false), 0.7 * mean_bce(lab) + 1.3 * mean_bce(sel), 1e-12);
}

TEST(EntropyLoss, KnownValues) {
  EXPECT_NEAR(binary_entropy(0.5), std::log(2.0), 1e-12);
  EXPECT_LT(binary_entropy(1.0), 1e-5);
  EXPECT_LT(binary_entropy(0.0), 1e-5);
  EXPECT_NEAR(0.5 * (binary_entropy(0.5) + binary_entropy(0.9)), 0.5 * (0.693147 + 0.325083), 1e-6);
}

TEST(EntropyLoss, UniformPredictionsGiveLn2) {
  Rng rng(18);
  Detector model(EmbeddingTable::random(10, 6, rng), small_extractor(), rng);
  model.set_zero();
  std::vector<TokenSequence> xs{random_tokens(8, 10, rng), random_tokens(8, 10, rng)};
  const std::vector<std::size_t> b{0, 1};
  EXPECT_NEAR(entropy_loss(model, xs, b, 1.0, false), std::log(2.0), 1e-12);
}

TEST(EntropyLoss, GradientMatchesFiniteDifferences) {
  Rng rng(19);
  Detector model(EmbeddingTable::random(20, 6, rng), small_extractor(), rng);
  std::vector<TokenSequence> xs{random_tokens(8, 20, rng), random_tokens(8, 20, rng), random_tokens(8, 20, rng)};
  const std::vector<std::size_t> b{0, 1, 2};
  auto params = model.params();
  Rng probe(20);
  const auto r = grad_check([&](bool g) { return entropy_loss(model, xs, b, 0.1, g); }, params, 100, probe, 1e-5,
                            [](const NamedParameter& np, std::size_t i) { return np.name == "embedding" && i < 6; });
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(Detector, GradientAuditPasses) {
  GradAuditConfig cfg;
  for (const auto& e : grad_audit(cfg, 4)) EXPECT_LT(e.result.max_relative_error, 1e-4) << e.model;
}

// ---------------------------------------------------------------- train_detector

namespace {
struct ToyRun {
  std::vector<Example> train, val;
  std::vector<WeakCandidate> weak;
  Detector init;
};

ToyRun toy_run(std::uint64_t seed) {
  Rng rng(seed);
  ToyRun t;
  t.train = separable_examples(40, 30, rng);
  t.val = separable_examples(20, 30, rng);
  const auto weak = separable_examples(30, 30, rng);
  for (std::size_t i = 0; i < weak.size(); ++i)
    t.weak.push_back({"w" + std::to_string(i), weak[i].tokens, i % 5 == 0 ? 1 - weak[i].label : weak[i].label, 0.7});
  t.init = Detector(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
  return t;
}
}  // namespace

TEST(TrainDetector, SupervisedSeparableToyFitsTrainingSet) {
  ToyRun t = toy_run(21);
  DetectorTrainConfig cfg;
  cfg.epochs = 100;
  cfg.batch_size = 10;
  cfg.adam.learning_rate = 1e-3;
  DetectorTrainData data;
  data.labeled = t.train;
  Rng rng(1), sel(2);
  const auto r = train_detector(t.init, data, TrainingMode::supervised, cfg, rng, sel);
  EXPECT_EQ(detector_accuracy(r.model, t.train), 1.0);
}

TEST(TrainDetector, EpochZeroIsNearChance) {
  double total = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    Rng rng(s);
    const auto val = separable_examples(100, 30, rng);
    Detector model(EmbeddingTable::random(30, 6, rng), small_extractor(), rng);
    total += detector_accuracy(model, val);
  }
  EXPECT_NEAR(total / 10.0, 0.5, 0.1);
}

TEST(TrainDetector, RetainAllSelectorEqualsWefendMinus) {
  ToyRun t = toy_run(22);
  DetectorTrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.adam.learning_rate = 1e-3;
  cfg.selector.override_mode = SelectorOverride::retain_all;
  DetectorTrainData data;
  data.labeled = t.train;
  data.weak = t.weak;
  data.validation = t.val;
  data.reward_validation = t.val;
  data.test = t.val;

  Rng r1(5), s1(6), r2(5), s2(6), init(7);
  const auto minus = train_detector(t.init, data, TrainingMode::wefend_minus, cfg, r1, s1);
  ReinforcedSelector selector(cfg.selector, init);
  const auto full = train_detector(t.init, data, TrainingMode::wefend, cfg, r2, s2, &selector);
  ASSERT_EQ(minus.history.size(), full.history.size());
  for (std::size_t i = 0; i < minus.history.size(); ++i) {
    EXPECT_EQ(minus.history[i].train_loss, full.history[i].train_loss);
    EXPECT_EQ(minus.history[i].validation.accuracy, full.history[i].validation.accuracy);
    EXPECT_EQ(minus.history[i].test->auc_roc, full.history[i].test->auc_roc);
  }
  EXPECT_EQ(minus.best_epoch, full.best_epoch);
}

TEST(TrainDetector, MissingInputsAreConfigErrors) {
  ToyRun t = toy_run(23);
  DetectorTrainConfig cfg;
  Rng rng(1), sel(2);
  DetectorTrainData data;
  data.labeled = t.train;
  EXPECT_THROW(train_detector(t.init, data, TrainingMode::wefend_minus, cfg, rng, sel), ConfigError);
  EXPECT_THROW(train_detector(t.init, data, TrainingMode::semi_supervised, cfg, rng, sel), ConfigError);
  data.weak = t.weak;
  EXPECT_THROW(train_detector(t.init, data, TrainingMode::wefend, cfg, rng, sel), ConfigError);
  EXPECT_THROW(parse_mode("bogus"), ConfigError);
}

TEST(TrainDetector, ReturnsBestValidationEpoch) {
  ToyRun t = toy_run(24);
  DetectorTrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 10;
  cfg.adam.learning_rate = 1e-3;
  DetectorTrainData data;
  data.labeled = t.train;
  data.validation = t.val;
  Rng rng(1), sel(2);
  const auto r = train_detector(t.init, data, TrainingMode::supervised, cfg, rng, sel);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (std::size_t e = 1; e < r.history.size(); ++e)
    if (r.history[e].validation.accuracy > best) {
      best = r.history[e].validation.accuracy;
      best_epoch = e;
    }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(detector_accuracy(r.model, t.val), best);
}
