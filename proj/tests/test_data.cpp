#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "test_util.hpp"

using namespace wefend;

namespace {

Document doc(std::string id, std::int64_t ts, std::vector<std::string> reports = {}, std::optional<int> label = {}) {
  return Document{std::move(id), "some text", std::move(reports), label, ts};
}

SynthConfig small_synth(std::uint64_t seed) {
  SynthConfig sc;
  sc.n_train_fake = sc.n_train_real = 300;
  sc.n_test_fake = sc.n_test_real = 300;
  sc.n_unlabeled = 600;
  sc.seed = seed;
  return sc;
}

// Count-based naive Bayes over content tokens: an independent content classifier.
struct TokenBayes {
  std::map<std::string, double> count[2];
  double total[2] = {0, 0};

  void fit(const std::vector<Document>& docs) {
    for (const auto& d : docs)
      for (const auto& t : split_whitespace(d.text)) {
        count[*d.label][t] += 1;
        total[*d.label] += 1;
      }
  }
  int predict(const Document& d) const {
    double score = 0.0;
    for (const auto& t : split_whitespace(d.text)) {
      auto c = [&](int k) {
        auto it = count[k].find(t);
        return (it == count[k].end() ? 0.0 : it->second) + 1.0;
      };
      score += std::log(c(1) / (total[1] + 1)) - std::log(c(0) / (total[0] + 1));
    }
    return score > 0 ? 1 : 0;
  }
  double accuracy(const std::vector<Document>& docs) const {
    std::size_t ok = 0;
    for (const auto& d : docs) ok += predict(d) == *d.label;
    return static_cast<double>(ok) / static_cast<double>(docs.size());
  }
};

double bayes_gap(double drift, std::uint64_t seed) {
  SynthConfig sc = small_synth(seed);
  sc.drift_strength = drift;
  const auto c = generate_synthetic(sc);
  Rng rng(seed);
  auto docs = c.train.documents;
  rng.shuffle(docs);
  const std::size_t cut = docs.size() * 8 / 10;
  TokenBayes nb;
  nb.fit({docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(cut)});
  return nb.accuracy({docs.begin() + static_cast<std::ptrdiff_t>(cut), docs.end()}) - nb.accuracy(c.test.documents);
}

ExperimentConfig annotator_config(double noise) {
  ExperimentConfig cfg;
  SynthConfig sc = small_synth(0);
  sc.n_train_fake = sc.n_train_real = 1000;
  sc.n_test_fake = sc.n_test_real = 100;
  sc.report_noise = noise;
  cfg.corpus.synthetic = sc;
  cfg.extractor.embedding_dim = 16;
  cfg.encoding = {12, 8};
  cfg.learning_rate = 1e-3;
  cfg.annotator_epochs = 20;
  return cfg;
}

}  // namespace

TEST(Dataset, EmptyFileGivesEmptyDataset) {
  std::istringstream is("");
  EXPECT_TRUE(read_dataset(is, "x").empty());
}

TEST(Dataset, RoundTripPreservesReports) {
  Dataset ds{"x", {doc("a", 5, {"r one", "r two"}, 1), doc("b", 6)}};
  std::stringstream ss;
  write_dataset(ss, ds);
  const Dataset back = read_dataset(ss, "x");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.documents[0].reports.size(), 2u);
  EXPECT_EQ(back.documents, ds.documents);
}

TEST(Dataset, FieldMapRenamesColumns) {
  std::istringstream is(R"({"news_id":"n1","title":"hello","complaints":["bad"],"y":1,"ts":3})" "\n");
  FieldMap f;
  f.id = "news_id";
  f.text = "title";
  f.reports = "complaints";
  f.label = "y";
  f.timestamp = "ts";
  const Dataset ds = read_dataset(is, "x", f);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.documents[0].id, "n1");
  EXPECT_EQ(ds.documents[0].reports, (std::vector<std::string>{"bad"}));
  EXPECT_EQ(ds.documents[0].label, 1);
}

TEST(Dataset, MalformedRecordsReportLine) {
  std::istringstream bad_json("{\"id\":\"a\",\"text\":\"t\",\"timestamp\":1}\n{not json}\n");
  try {
    read_dataset(bad_json, "x");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad_label(R"({"id":"a","text":"t","label":3,"timestamp":1})" "\n");
  EXPECT_THROW(read_dataset(bad_label, "x"), ParseError);
  std::istringstream no_ts(R"({"id":"a","text":"t"})" "\n");
  EXPECT_THROW(read_dataset(no_ts, "x"), ParseError);
}

TEST(Dataset, DuplicateIdsAreIntegrityErrors) {
  std::istringstream is(R"({"id":"a","text":"t","timestamp":1})" "\n" R"({"id":"a","text":"u","timestamp":2})" "\n");
  EXPECT_THROW(read_dataset(is, "x"), IntegrityError);
}

TEST(SplitByTimestamp, CutoffBelowAllGivesEmptyTrain) {
  Dataset ds{"x", {doc("a", 10), doc("b", 20)}};
  const auto s = split_by_timestamp(ds, 5);
  EXPECT_TRUE(s.train.empty());
  EXPECT_EQ(s.test.size(), 2u);
}

TEST(SplitByTimestamp, CutoffAboveAllGivesEmptyTest) {
  Dataset ds{"x", {doc("a", 10), doc("b", 20)}};
  const auto s = split_by_timestamp(ds, 100);
  EXPECT_EQ(s.train.size(), 2u);
  EXPECT_TRUE(s.test.empty());
}

TEST(SplitByTimestamp, PartitionSizesMatchPredicateCount) {
  Rng rng(3);
  Dataset ds;
  for (int i = 0; i < 10; ++i) ds.documents.push_back(doc("d" + std::to_string(i), static_cast<std::int64_t>(rng.below(100))));
  const std::int64_t cutoff = 50;
  std::size_t before = 0;
  for (const auto& d : ds.documents) before += d.timestamp < cutoff;
  const auto s = split_by_timestamp(ds, cutoff);
  EXPECT_EQ(s.train.size(), before);
  EXPECT_EQ(s.test.size(), 10 - before);
  for (const auto& d : s.train.documents) EXPECT_LT(d.timestamp, cutoff);
  for (const auto& d : s.test.documents) EXPECT_GE(d.timestamp, cutoff);
}

TEST(Stats, EmptyDatasetIsAllZero) {
  const auto rows = dataset_stats(Dataset{}, "x");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].news, 0u);
  EXPECT_EQ(rows[0].avg_reports(), 0.0);
}

TEST(Stats, MeanReportsPerDocument) {
  Dataset ds{"x", {doc("a", 1, {"r"}), doc("b", 2, {"r", "s", "t"})}};
  const auto rows = dataset_stats(ds, "x");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].news, 2u);
  EXPECT_EQ(rows[0].reports, 4u);
  EXPECT_EQ(rows[0].avg_reports(), 2.0);
}

TEST(Stats, SplitsByClass) {
  Dataset ds{"x", {doc("a", 1, {"r"}, 1), doc("b", 2, {"r", "s"}, 0), doc("c", 3, {"r", "s", "t"}, 1)}};
  const auto rows = dataset_stats(ds, "x");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].cls, "fake");
  EXPECT_EQ(rows[0].news, 2u);
  EXPECT_EQ(rows[0].reports, 4u);
  EXPECT_EQ(rows[1].cls, "real");
}

TEST(Synthetic, SameSeedSameCorpus) {
  const auto a = generate_synthetic(small_synth(4)), b = generate_synthetic(small_synth(4));
  EXPECT_EQ(a.train.documents, b.train.documents);
  EXPECT_EQ(a.unlabeled.documents, b.unlabeled.documents);
  EXPECT_EQ(a.unlabeled_truth, b.unlabeled_truth);
  EXPECT_NE(generate_synthetic(small_synth(5)).train.documents, a.train.documents);
}

TEST(Synthetic, WindowsAreOrderedAndUnlabeledHidesLabels) {
  const auto c = generate_synthetic(small_synth(6));
  std::int64_t max_train = 0, min_later = INT64_MAX;
  for (const auto& d : c.train.documents) max_train = std::max(max_train, d.timestamp);
  for (const auto* ds : {&c.test, &c.unlabeled})
    for (const auto& d : ds->documents) min_later = std::min(min_later, d.timestamp);
  EXPECT_LT(max_train, min_later);
  for (const auto& d : c.unlabeled.documents) EXPECT_FALSE(d.label.has_value());
  EXPECT_EQ(c.unlabeled_truth.size(), c.unlabeled.size());
}

TEST(Synthetic, ReportCountMeanMatchesConfig) {
  SynthConfig sc = small_synth(7);
  sc.n_unlabeled = 10000;
  const auto c = generate_synthetic(sc);
  std::size_t reports = 0;
  for (const auto& d : c.unlabeled.documents) reports += d.reports.size();
  const double mean = static_cast<double>(reports) / 10000.0;
  EXPECT_GE(mean, 1.3);
  EXPECT_LE(mean, 1.5);
}

TEST(Synthetic, ReportCuesFollowTrueLabelUpToNoise) {
  SynthConfig sc = small_synth(8);
  sc.report_noise = 0.2;
  const auto c = generate_synthetic(sc);
  std::size_t agree = 0, total = 0;
  for (const auto& d : c.train.documents)
    for (const auto& r : d.reports) {
      for (const auto& t : split_whitespace(r))
        if (SynthInventory::is_cue(t)) {
          agree += SynthInventory::cue_label(t) == *d.label;
          ++total;
          break;
        }
    }
  ASSERT_GT(total, 500u);
  EXPECT_NEAR(static_cast<double>(agree) / static_cast<double>(total), 0.8, 0.04);
}

TEST(Synthetic, NoDriftMeansNoContentGap) {
  double gap = 0.0;
  for (std::uint64_t s = 1; s <= 5; ++s) gap += bayes_gap(0.0, s);
  EXPECT_LE(std::abs(gap / 5.0), 0.03);
}

TEST(Synthetic, DriftOpensContentGap) {
  double gap = 0.0;
  for (std::uint64_t s = 1; s <= 5; ++s) gap += bayes_gap(0.5, s);
  EXPECT_GE(gap / 5.0, 0.05);
}

TEST(Synthetic, InvalidConfigRejected) {
  SynthConfig sc;
  sc.report_noise = 1.5;
  EXPECT_THROW(generate_synthetic(sc), ConfigError);
}

TEST(Annotate, NoiselessReportsGiveAccurateWeakLabels) {
  const ExperimentConfig cfg = annotator_config(0.0);
  const SeedContext ctx = prepare_seed(cfg, 1, true);
  EXPECT_GT(label_accuracy(ctx.weak_train, ctx.weak_train_truth), 0.95);
}

TEST(Annotate, CueReportsGiveWeakLabelsAboveNinety) {
  const ExperimentConfig cfg = annotator_config(0.05);
  const SeedContext ctx = prepare_seed(cfg, 2, true);
  EXPECT_GT(label_accuracy(ctx.weak_train, ctx.weak_train_truth), 0.9);
}

TEST(Truth, MissingIdIsIntegrityError) {
  ExperimentConfig cfg = annotator_config(0.1);
  cfg.annotator_epochs = 1;
  const auto corpus = load_corpus(cfg.corpus, 1);
  SeedContext ctx = prepare_context(cfg, corpus, 1);
  ctx.unlabeled_truth.erase(ctx.unlabeled_truth.begin());
  const auto ann = train_context_annotator(cfg, ctx, 1);
  EXPECT_THROW(attach_weak_labels(cfg, ctx, annotate(ann.model, ctx.unlabeled_docs), 1), IntegrityError);
}

TEST(Features, ZeroExtractorGivesZeroRows) {
  Rng rng(1);
  Detector model(EmbeddingTable::random(10, 6, rng), wefend::testing::small_extractor(), rng);
  model.set_zero();
  std::vector<EncodedDoc> docs(3);
  for (std::size_t i = 0; i < 3; ++i) {
    docs[i].id = "d" + std::to_string(i);
    docs[i].content = wefend::testing::random_tokens(8, 10, rng);
  }
  std::ostringstream os;
  dump_features(os, docs, "test", model);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 16), "id,split,label,f");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    for (int k = 0; k < 3; ++k) std::getline(ls, cell, ',');
    std::size_t n = 0;
    while (std::getline(ls, cell, ',')) {
      EXPECT_EQ(std::stod(cell), 0.0);
      ++n;
    }
    EXPECT_EQ(n, 40u);
  }
  EXPECT_EQ(rows, docs.size());
}

TEST(Features, RerunIsByteIdentical) {
  Rng rng(2);
  Annotator model(EmbeddingTable::random(10, 6, rng), wefend::testing::small_extractor(), rng);
  std::vector<EncodedDoc> docs(4);
  for (std::size_t i = 0; i < 4; ++i) {
    docs[i].id = "d" + std::to_string(i);
    docs[i].label = static_cast<int>(i % 2);
    if (i != 2) docs[i].reports.reports = {wefend::testing::random_tokens(8, 10, rng)};
  }
  const auto dir = wefend::testing::scratch_dir("features");
  dump_features((dir / "a.csv").string(), docs, "x", model);
  dump_features((dir / "b.csv").string(), docs, "x", model);
  const auto a = wefend::testing::slurp(dir / "a.csv");
  EXPECT_EQ(a, wefend::testing::slurp(dir / "b.csv"));
  EXPECT_NE(a.find("d2,x,0,NA"), std::string::npos);
}

TEST(Encoding, ContentAndReportsUseConfiguredLengths) {
  const Vocabulary v = build_vocab(std::vector<std::string>{"a b c"});
  const EncodedDoc e = encode(Document{"x", "a b", {"c", "a c"}, 1, 0}, v, {7, 6});
  EXPECT_EQ(e.content.size(), 7u);
  ASSERT_EQ(e.reports.reports.size(), 2u);
  EXPECT_EQ(e.reports.reports[1].size(), 6u);
  EXPECT_EQ(e.label, 1);
}
