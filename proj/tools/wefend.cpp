// Command-line front end: data generation, training, selection, experiments.

#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "wefend/wefend.hpp"

namespace fs = std::filesystem;
using namespace wefend;

namespace {

constexpr const char* kVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Options {
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds;
  std::string mode = "supervised";
  std::vector<std::string> modes;

  std::size_t epochs = 100;
  std::size_t annotator_epochs = 100;
  std::size_t batch_size = kDefaultBatchSize;
  double lr = 1e-4;
  double lambda_l = 1.0;
  double lambda_s = 1.0;
  double lambda_entropy = 0.1;

  std::size_t bags = 200;
  std::size_t bag_size = 100;
  double tau = 0.001;
  double policy_lr = 1e-4;
  double reward_lr = 1e-4;
  std::size_t reward_epochs = 1;
  std::size_t validation_cap = 500;
  std::size_t selector_refresh = 1;
  bool retain_all = false;

  std::size_t embedding_dim = kDefaultEmbeddingDim;
  std::size_t content_max_len = kDefaultMaxLen;
  std::size_t report_max_len = kDefaultMaxLen;
  std::size_t min_count = 1;
  std::string embeddings;

  double drift = 0.5;
  double report_noise = 0.1;
  double reports_per_doc = 1.4;
  std::size_t n_train = 1000;  // per class
  std::size_t n_test = 500;    // per class
  std::size_t n_unlabeled = 10000;
  std::size_t synth_vocab = 2000;

  std::vector<std::string> datasets;
  std::string unlabeled;
  std::string test;
  std::string truth;
  std::string weak;
  std::string vocab;
  std::string checkpoint;
  std::string model_kind = "detector";
  std::string split;
  std::int64_t cutoff = 0;
  bool has_cutoff = false;
  std::vector<std::string> field_map;

  std::size_t jobs = 1;
  std::size_t probes = 120;
};

// Which inputs a command read and which files it wrote, for the manifest.
struct RunFiles {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

std::uint64_t file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (is.read(buf, sizeof buf) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!is) break;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << text;
}

/// Resolved configuration plus provenance, written before any training. The
/// body is a config file: `wefend <command> --config manifest.ini` replays it.
void write_manifest(const CLI::App& app, const std::string& command, const Options& opt, const RunFiles& files) {
  std::ostringstream os;
  os << "# run manifest\n# command: " << command << "\n# version: " << kVersion << '\n';
  for (const auto& in : files.inputs) os << "# input: " << in << " fnv1a64=" << hex64(file_digest(in)) << '\n';
  for (const auto& out : files.outputs) os << "# output: " << (fs::path(opt.out_dir) / out).string() << '\n';
  for (const CLI::Option* opt : app.get_options()) {
    const std::string key = opt->get_single_name();
    if (key.empty() || key == "help" || key == "version" || key == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
      if (opt->get_type_size() == 0 && value.empty()) value = "true";
    } else {
      value = opt->get_default_str();
    }
    if (value.empty()) continue;
    os << key << "=\"" << value << "\"\n";
  }
  write_text(fs::path(opt.out_dir) / "manifest.ini", os.str());
}

FieldMap parse_field_map(const std::vector<std::string>& entries) {
  FieldMap f;
  for (const auto& e : entries) {
    const auto eq = e.find('=');
    if (eq == std::string::npos) throw ConfigError("field map entry '" + e + "' is not key=name");
    const std::string key = e.substr(0, eq), name = e.substr(eq + 1);
    if (key == "id") f.id = name;
    else if (key == "text") f.text = name;
    else if (key == "reports") f.reports = name;
    else if (key == "label") f.label = name;
    else if (key == "timestamp") f.timestamp = name;
    else throw ConfigError("unknown field map key '" + key + "'");
  }
  return f;
}

SynthConfig synth_config(const Options& o, std::uint64_t seed) {
  SynthConfig sc;
  sc.n_train_fake = sc.n_train_real = o.n_train;
  sc.n_test_fake = sc.n_test_real = o.n_test;
  sc.n_unlabeled = o.n_unlabeled;
  sc.vocab_size = o.synth_vocab;
  sc.drift_strength = o.drift;
  sc.report_noise = o.report_noise;
  sc.reports_per_doc_mean = o.reports_per_doc;
  sc.seed = seed;
  return sc;
}

std::vector<std::uint64_t> seed_list(const Options& o) { return o.seeds.empty() ? std::vector{o.seed} : o.seeds; }

std::vector<TrainingMode> mode_list(const Options& o) {
  std::vector<TrainingMode> out;
  for (const auto& m : o.modes.empty() ? std::vector{o.mode} : o.modes) out.push_back(parse_mode(m));
  return out;
}

ExperimentConfig experiment_config(const Options& o) {
  ExperimentConfig cfg;
  cfg.modes = mode_list(o);
  cfg.seeds = seed_list(o);
  if (o.datasets.empty()) {
    cfg.corpus.synthetic = synth_config(o, 0);
  } else {
    cfg.corpus.synthetic.reset();
    cfg.corpus.train_path = o.datasets.front();
    cfg.corpus.test_path = o.test;
    cfg.corpus.unlabeled_path = o.unlabeled;
    cfg.corpus.truth_path = o.truth;
    cfg.corpus.fields = parse_field_map(o.field_map);
  }
  cfg.encoding.content_max_len = o.content_max_len;
  cfg.encoding.report_max_len = o.report_max_len;
  cfg.extractor.embedding_dim = o.embedding_dim;
  cfg.min_count = o.min_count;
  cfg.embeddings_path = o.embeddings;
  cfg.annotator_epochs = o.annotator_epochs;
  cfg.detector_epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.learning_rate = o.lr;
  cfg.weights = {o.lambda_l, o.lambda_s, o.lambda_entropy};
  cfg.selector.phase1_bags = cfg.selector.phase2_bags = o.bags;
  cfg.selector.bag_size = o.bag_size;
  cfg.selector.tau = o.tau;
  cfg.selector.policy_lr = o.policy_lr;
  cfg.selector.reward_lr = o.reward_lr;
  cfg.selector.reward_epochs = o.reward_epochs;
  cfg.selector.reward_batch_size = o.batch_size;
  cfg.selector.validation_cap = o.validation_cap;
  cfg.selector.override_mode = o.retain_all ? SelectorOverride::retain_all : SelectorOverride::none;
  cfg.selector_refresh = o.selector_refresh;
  return cfg;
}

/// Corpus for the single-step commands: --dataset is the labeled set, split
/// into train / test by --cutoff-timestamp when given.
SyntheticCorpus file_corpus(const Options& o, RunFiles& files) {
  if (o.datasets.empty()) throw ConfigError("--dataset is required");
  const FieldMap fields = parse_field_map(o.field_map);
  SyntheticCorpus c;
  c.train = load_dataset(o.datasets.front(), fields);
  files.inputs.push_back(o.datasets.front());
  if (o.has_cutoff) {
    auto split = split_by_timestamp(c.train, o.cutoff);
    c.train = std::move(split.train);
    c.test = std::move(split.test);
  }
  if (!o.test.empty()) {
    c.test = load_dataset(o.test, fields);
    files.inputs.push_back(o.test);
  }
  if (!o.unlabeled.empty()) {
    c.unlabeled = load_dataset(o.unlabeled, fields);
    files.inputs.push_back(o.unlabeled);
  }
  if (!o.truth.empty()) {
    const auto truth = load_truth(o.truth);
    c.unlabeled_truth.assign(truth.begin(), truth.end());
    files.inputs.push_back(o.truth);
  }
  return c;
}

std::optional<Vocabulary> input_vocab(const Options& o, RunFiles& files) {
  if (o.vocab.empty()) return std::nullopt;
  files.inputs.push_back(o.vocab);
  return Vocabulary::load(o.vocab);
}

AnnotationResult load_weak_labels(const std::string& path, const std::vector<EncodedDoc>& docs) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < docs.size(); ++i) index[docs[i].id] = i;
  AnnotationResult out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    std::istringstream ls(line);
    std::string id;
    int label = 0;
    double conf = 0.0;
    if (!std::getline(ls, id, '\t') || !(ls >> label >> conf) || (label != 0 && label != 1))
      throw ParseError("malformed weak label row", lineno);
    auto it = index.find(id);
    if (it == index.end()) throw IntegrityError("weak label for unknown document '" + id + "'");
    out.labels.push_back({label, conf});
    out.doc_index.push_back(it->second);
  }
  return out;
}

void print_metrics(std::ostream& os, const std::string& name, const MetricsReport& m) {
  os << name << ": accuracy " << m.accuracy << " auc ";
  if (m.auc_roc)
    os << *m.auc_roc;
  else
    os << "NA";
  os << " f1_fake " << m.fake.f1 << " f1_real " << m.real.f1 << '\n';
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_gen_data(const CLI::App& app, const Options& o) {
  RunFiles files;
  files.outputs = {"train.jsonl", "test.jsonl", "unlabeled.jsonl", "unlabeled_truth.tsv"};
  write_manifest(app, "gen-data", o, files);
  const auto corpus = generate_synthetic(synth_config(o, o.seed));
  const fs::path dir(o.out_dir);
  save_dataset((dir / "train.jsonl").string(), corpus.train);
  save_dataset((dir / "test.jsonl").string(), corpus.test);
  save_dataset((dir / "unlabeled.jsonl").string(), corpus.unlabeled);
  save_truth((dir / "unlabeled_truth.tsv").string(), corpus.unlabeled_truth);
  std::cout << "wrote " << corpus.train.size() << " train, " << corpus.test.size() << " test, "
            << corpus.unlabeled.size() << " unlabeled documents to " << o.out_dir << '\n';
  return kExitOk;
}

int cmd_stats(const CLI::App& app, const Options& o) {
  RunFiles files;
  std::vector<std::string> paths = o.datasets;
  if (!o.unlabeled.empty()) paths.push_back(o.unlabeled);
  if (!o.test.empty()) paths.push_back(o.test);
  if (paths.empty()) throw ConfigError("stats needs at least one --dataset");
  files.inputs = paths;
  files.outputs = {"stats.txt"};
  write_manifest(app, "stats", o, files);
  const FieldMap fields = parse_field_map(o.field_map);
  std::vector<StatsRow> rows;
  for (const auto& p : paths) {
    const Dataset ds = load_dataset(p, fields);
    const std::string name = fs::path(p).stem().string();
    if (o.has_cutoff) {
      const auto split = split_by_timestamp(ds, o.cutoff);
      for (const auto& [tag, docs] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
        auto r = dataset_stats(*docs, name + "-" + tag);
        rows.insert(rows.end(), r.begin(), r.end());
      }
    } else {
      auto r = dataset_stats(ds, name);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  const std::string table = format_stats(rows);
  write_text(fs::path(o.out_dir) / "stats.txt", table);
  std::cout << table;
  return kExitOk;
}

int cmd_train_annotator(const CLI::App& app, const Options& o) {
  RunFiles files;
  SyntheticCorpus corpus = file_corpus(o, files);
  const auto vocab = input_vocab(o, files);
  files.outputs = {"annotator.ckpt", "vocab.txt", "annotator_history.csv"};
  write_manifest(app, "train-annotator", o, files);

  const ExperimentConfig cfg = experiment_config(o);
  const SeedContext ctx = prepare_context(cfg, corpus, o.seed, vocab ? &*vocab : nullptr);
  auto trained = train_context_annotator(cfg, ctx, o.seed);
  const fs::path dir(o.out_dir);
  save_model((dir / "annotator.ckpt").string(), trained.model);
  ctx.vocab.save((dir / "vocab.txt").string());
  std::ostringstream hist;
  hist << "epoch,train_loss,validation_accuracy\n" << std::fixed << std::setprecision(6);
  for (const auto& h : trained.history) hist << h.epoch << ',' << h.train_loss << ',' << h.validation_accuracy << '\n';
  write_text(dir / "annotator_history.csv", hist.str());
  std::cout << "best epoch " << trained.best_epoch << " validation accuracy "
            << annotator_accuracy(trained.model, report_examples(ctx.validation_docs)) << '\n';
  return kExitOk;
}

int cmd_annotate(const CLI::App& app, const Options& o) {
  if (o.checkpoint.empty() || o.vocab.empty()) throw ConfigError("annotate needs --checkpoint and --vocab");
  if (o.datasets.empty()) throw ConfigError("annotate needs --dataset (documents to label)");
  RunFiles files{{o.checkpoint, o.vocab, o.datasets.front()}, {"weak_labels.tsv"}};
  if (!o.truth.empty()) files.inputs.push_back(o.truth);
  write_manifest(app, "annotate", o, files);

  const Annotator model = load_annotator(o.checkpoint);
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const Dataset ds = load_dataset(o.datasets.front(), parse_field_map(o.field_map));
  const auto docs = encode_all(ds, vocab, {o.content_max_len, o.report_max_len});
  const AnnotationResult ann = annotate(model, docs);

  std::ostringstream os;
  os << "id\tweak_label\tconfidence\n" << std::fixed << std::setprecision(9);
  for (std::size_t k = 0; k < ann.labels.size(); ++k)
    os << docs[ann.doc_index[k]].id << '\t' << ann.labels[k].label << '\t' << ann.labels[k].confidence << '\n';
  write_text(fs::path(o.out_dir) / "weak_labels.tsv", os.str());
  std::cout << "labeled " << ann.labels.size() << " documents, skipped " << ann.skipped << " without reports\n";
  if (!o.truth.empty()) {
    const auto truth = load_truth(o.truth);
    std::size_t ok = 0;
    for (std::size_t k = 0; k < ann.labels.size(); ++k) {
      auto it = truth.find(docs[ann.doc_index[k]].id);
      if (it == truth.end()) throw IntegrityError("truth file lacks '" + docs[ann.doc_index[k]].id + "'");
      ok += it->second == ann.labels[k].label;
    }
    std::cout << "weak label accuracy " << (ann.labels.empty() ? 0.0 : double(ok) / double(ann.labels.size())) << '\n';
  }
  return kExitOk;
}

int cmd_select(const CLI::App& app, const Options& o) {
  if (o.checkpoint.empty() || o.vocab.empty() || o.weak.empty() || o.unlabeled.empty() || o.datasets.empty())
    throw ConfigError("select needs --checkpoint, --vocab, --weak, --unlabeled and --dataset (labeled validation)");
  RunFiles files{{o.checkpoint, o.vocab, o.weak, o.unlabeled, o.datasets.front()}, {"selection.tsv"}};
  write_manifest(app, "select", o, files);

  const ExperimentConfig cfg = experiment_config(o);
  const Detector detector = load_detector(o.checkpoint);
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const FieldMap fields = parse_field_map(o.field_map);
  const auto unl = encode_all(load_dataset(o.unlabeled, fields), vocab, cfg.encoding);
  const auto val = content_examples(encode_all(load_dataset(o.datasets.front(), fields), vocab, cfg.encoding));
  const AnnotationResult ann = load_weak_labels(o.weak, unl);
  std::vector<WeakCandidate> candidates;
  for (std::size_t k = 0; k < ann.labels.size(); ++k) {
    const auto& d = unl[ann.doc_index[k]];
    candidates.push_back({d.id, d.content, ann.labels[k].label, ann.labels[k].confidence});
  }
  Rng init = make_stream(o.seed, "policy-init");
  Rng rng = make_stream(o.seed, "selector");
  ReinforcedSelector selector(cfg.selector, init);
  const SelectionResult result = selector.run(candidates, detector, val, rng);
  write_selection_report((fs::path(o.out_dir) / "selection.tsv").string(), result);
  std::cout << "selected " << result.selected.size() << " of " << candidates.size() << " candidates (base accuracy "
            << result.base_accuracy << ")\n";
  return kExitOk;
}

int cmd_train_detector(const CLI::App& app, const Options& o) {
  RunFiles files;
  SyntheticCorpus corpus = file_corpus(o, files);
  const auto vocab = input_vocab(o, files);
  const TrainingMode mode = parse_mode(o.mode);
  if (mode_needs_weak(mode) && (o.weak.empty() || o.unlabeled.empty()))
    throw ConfigError(std::string("mode ") + mode_name(mode) + " needs --weak and --unlabeled");
  if (!o.weak.empty()) files.inputs.push_back(o.weak);
  files.outputs = {"detector.ckpt", "vocab.txt", "history.csv"};
  write_manifest(app, "train-detector", o, files);

  const ExperimentConfig cfg = experiment_config(o);
  SeedContext ctx = prepare_context(cfg, corpus, o.seed, vocab ? &*vocab : nullptr);
  if (!o.weak.empty()) attach_weak_labels(cfg, ctx, load_weak_labels(o.weak, ctx.unlabeled_docs), o.seed);

  Rng init_rng = make_stream(o.seed, "detector-init");
  Rng train_rng = make_stream(o.seed, "detector-train");
  Rng sel_rng = make_stream(o.seed, "selector");
  Rng policy_rng = make_stream(o.seed, "policy-init");
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
  data.validation = mode_needs_weak(mode) ? std::span<const Example>(ctx.weak_validation) : ctx.validation;
  if (mode_needs_weak(mode)) {
    data.weak = ctx.weak_train;
    data.weak_truth = ctx.weak_train_truth;
  }
  if (mode_needs_labeled(mode)) data.labeled = ctx.train;
  if (mode == TrainingMode::semi_supervised) data.unlabeled = ctx.unlabeled_content;
  std::optional<ReinforcedSelector> selector;
  if (mode == TrainingMode::wefend) selector.emplace(cfg.selector, policy_rng);

  auto trained = train_detector(Detector(ctx.initial_embedding, cfg.extractor, init_rng), data, mode, dcfg, train_rng,
                                sel_rng, selector ? &*selector : nullptr);
  const fs::path dir(o.out_dir);
  save_model((dir / "detector.ckpt").string(), trained.model);
  ctx.vocab.save((dir / "vocab.txt").string());
  write_text(dir / "history.csv", format_history_csv(trained.history));
  std::cout << "best epoch " << trained.best_epoch << '\n';
  if (!ctx.test.empty()) print_metrics(std::cout, "test", evaluate_detector(trained.model, ctx.test));
  return kExitOk;
}

int cmd_run_experiment(const CLI::App& app, const Options& o) {
  const ExperimentConfig cfg = experiment_config(o);
  cfg.validate();
  RunFiles files;
  for (const auto* p : {&cfg.corpus.train_path, &cfg.corpus.test_path, &cfg.corpus.unlabeled_path, &cfg.corpus.truth_path,
                        &cfg.embeddings_path})
    if (!p->empty()) files.inputs.push_back(*p);
  files.outputs = {"table.txt", "table.csv", "runs.csv", "curves.csv", "runs/"};
  write_manifest(app, "run-experiment", o, files);

  const fs::path dir(o.out_dir);
  const fs::path results = dir / "results";
  fs::create_directories(results);
  fs::create_directories(dir / "runs");
  auto result_file = [&](std::uint64_t seed) { return (results / ("seed-" + std::to_string(seed) + ".json")).string(); };

  if (o.jobs <= 1) {
    for (auto seed : cfg.seeds) save_runs(result_file(seed), run_seed(cfg, seed));
  } else {
    std::cout.flush();
    std::size_t running = 0, next = 0;
    bool failed = false;
    auto reap = [&] {
      int status = 0;
      if (::wait(&status) > 0) {
        --running;
        if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed = true;
      }
    };
    while (next < cfg.seeds.size()) {
      if (running >= o.jobs) reap();
      const std::uint64_t seed = cfg.seeds[next++];
      const pid_t pid = ::fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        int code = 0;
        try {
          save_runs(result_file(seed), run_seed(cfg, seed));
        } catch (const std::exception& e) {
          std::cerr << "seed " << seed << ": " << e.what() << '\n';
          code = kExitData;
        }
        std::_Exit(code);
      }
      ++running;
    }
    while (running > 0) reap();
    if (failed) throw std::runtime_error("a per-seed job failed");
  }

  std::vector<RunResult> runs;
  for (auto seed : cfg.seeds) {
    auto r = load_runs(result_file(seed));
    runs.insert(runs.end(), r.begin(), r.end());
  }
  const auto rows = summarize(runs, cfg.modes);
  write_text(dir / "table.txt", format_table(rows));
  write_text(dir / "table.csv", format_table_csv(rows));
  write_text(dir / "runs.csv", format_runs_csv(runs));
  write_text(dir / "curves.csv", format_curves_csv(runs));
  for (const auto& r : runs)
    write_text(dir / "runs" / (std::string(mode_name(r.mode)) + "-seed" + std::to_string(r.seed) + ".csv"),
               format_history_csv(r.history));
  std::cout << format_table(rows);
  return kExitOk;
}

int cmd_shift_analysis(const CLI::App& app, const Options& o) {
  const ExperimentConfig cfg = experiment_config(o);
  RunFiles files;
  if (!cfg.corpus.synthetic) files.inputs = {cfg.corpus.train_path, cfg.corpus.test_path};
  files.outputs = {"shift.csv"};
  write_manifest(app, "shift-analysis", o, files);

  std::ostringstream os;
  os << "seed,content_same,content_different,content_gap,annotator_same,annotator_different,annotator_gap\n"
     << std::fixed << std::setprecision(6);
  std::vector<double> cols[6];
  for (auto seed : cfg.seeds) {
    const ShiftReport r = run_shift_analysis(cfg, seed);
    const double v[6] = {r.content_same,   r.content_different,   r.content_gap(),
                         r.annotator_same, r.annotator_different, r.annotator_gap()};
    os << seed;
    for (int k = 0; k < 6; ++k) {
      os << ',' << v[k];
      cols[k].push_back(v[k]);
    }
    os << '\n';
  }
  os << "mean";
  for (const auto& c : cols) os << ',' << mean_std(c).mean;
  os << '\n';
  write_text(fs::path(o.out_dir) / "shift.csv", os.str());
  std::cout << os.str();
  return kExitOk;
}

int cmd_dump_features(const CLI::App& app, const Options& o) {
  if (o.checkpoint.empty() || o.vocab.empty() || o.datasets.empty())
    throw ConfigError("dump-features needs --checkpoint, --vocab and --dataset");
  if (o.model_kind != "detector" && o.model_kind != "annotator")
    throw ConfigError("--model must be detector or annotator");
  RunFiles files{{o.checkpoint, o.vocab}, {"features.csv"}};
  files.inputs.insert(files.inputs.end(), o.datasets.begin(), o.datasets.end());
  write_manifest(app, "dump-features", o, files);

  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const FieldMap fields = parse_field_map(o.field_map);
  std::ofstream os(fs::path(o.out_dir) / "features.csv", std::ios::binary);
  if (!os) throw std::runtime_error("cannot write features.csv");
  std::optional<Detector> det;
  std::optional<Annotator> ann;
  if (o.model_kind == "detector")
    det = load_detector(o.checkpoint);
  else
    ann = load_annotator(o.checkpoint);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < o.datasets.size(); ++i) {
    const auto docs = encode_all(load_dataset(o.datasets[i], fields), vocab, {o.content_max_len, o.report_max_len});
    const std::string tag = o.split.empty() ? fs::path(o.datasets[i]).stem().string() : o.split;
    if (det)
      dump_features(os, docs, tag, *det, i == 0);
    else
      dump_features(os, docs, tag, *ann, i == 0);
    rows += docs.size();
  }
  std::cout << "wrote " << rows << " feature rows\n";
  return kExitOk;
}

int cmd_grad_check(const CLI::App& app, const Options& o) {
  RunFiles files{{}, {"grad_check.txt"}};
  write_manifest(app, "grad-check", o, files);
  GradAuditConfig cfg;
  cfg.probes = o.probes;
  std::ostringstream os;
  bool ok = true;
  for (const auto& e : grad_audit(cfg, o.seed)) {
    const bool pass = e.result.max_relative_error < cfg.tolerance;
    ok = ok && pass;
    os << e.model << " max_relative_error " << e.result.max_relative_error << " probes " << e.result.probes << ' '
       << (pass ? "PASS" : "FAIL") << '\n';
  }
  write_text(fs::path(o.out_dir) / "grad_check.txt", os.str());
  std::cout << os.str();
  return ok ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised fake news detection toolkit"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "Config file (key = value); flags override it");
  app.fallthrough();
  app.require_subcommand(0, 1);

  Options o;
  app.add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "Root seed")->capture_default_str();
  app.add_option("--seeds", o.seeds, "Seed list for experiments")->delimiter(',');
  app.add_option("--mode", o.mode, "Training mode")->capture_default_str();
  app.add_option("--modes", o.modes, "Mode list for experiments")->delimiter(',');
  app.add_option("--epochs", o.epochs, "Detector epochs")->capture_default_str();
  app.add_option("--annotator-epochs", o.annotator_epochs, "Annotator epochs")->capture_default_str();
  app.add_option("--batch-size", o.batch_size, "Mini-batch size")->capture_default_str();
  app.add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  app.add_option("--lambda-l", o.lambda_l, "Labeled loss weight")->capture_default_str();
  app.add_option("--lambda-s", o.lambda_s, "Selected weak loss weight")->capture_default_str();
  app.add_option("--lambda-entropy", o.lambda_entropy, "Entropy weight (semi-supervised)")->capture_default_str();
  app.add_option("--bags", o.bags, "Selector bags per phase (K)")->capture_default_str();
  app.add_option("--bag-size", o.bag_size, "Samples per bag (B)")->capture_default_str();
  app.add_option("--tau", o.tau, "Target network soft update rate")->capture_default_str();
  app.add_option("--policy-lr", o.policy_lr, "Policy learning rate")->capture_default_str();
  app.add_option("--reward-lr", o.reward_lr, "Learning rate of the reward fine-tune")->capture_default_str();
  app.add_option("--reward-epochs", o.reward_epochs, "Epochs of the reward fine-tune")->capture_default_str();
  app.add_option("--validation-cap", o.validation_cap, "Reward validation size cap")->capture_default_str();
  app.add_option("--selector-refresh", o.selector_refresh, "Re-run the selector every N epochs")
      ->capture_default_str();
  app.add_flag("--retain-all", o.retain_all, "Force the selector to keep every weak sample");
  app.add_option("--embedding-dim", o.embedding_dim, "Word embedding width")->capture_default_str();
  app.add_option("--content-max-len", o.content_max_len, "Content tokens kept")->capture_default_str();
  app.add_option("--report-max-len", o.report_max_len, "Report tokens kept")->capture_default_str();
  app.add_option("--min-count", o.min_count, "Vocabulary frequency cutoff")->capture_default_str();
  app.add_option("--embeddings", o.embeddings, "Pretrained embedding text file");
  app.add_option("--drift", o.drift, "Synthetic topic drift strength")->capture_default_str();
  app.add_option("--report-noise", o.report_noise, "Synthetic report cue noise")->capture_default_str();
  app.add_option("--reports-per-doc", o.reports_per_doc, "Synthetic mean reports per document")
      ->capture_default_str();
  app.add_option("--n-train", o.n_train, "Synthetic labeled training documents per class")->capture_default_str();
  app.add_option("--n-test", o.n_test, "Synthetic test documents per class")->capture_default_str();
  app.add_option("--n-unlabeled", o.n_unlabeled, "Synthetic unlabeled documents")->capture_default_str();
  app.add_option("--synth-vocab", o.synth_vocab, "Synthetic background vocabulary size")->capture_default_str();
  app.add_option("--dataset", o.datasets, "Dataset file(s); the first is the labeled set")->delimiter(',');
  app.add_option("--unlabeled", o.unlabeled, "Unlabeled dataset file");
  app.add_option("--test", o.test, "Labeled test dataset file");
  app.add_option("--truth", o.truth, "Ground truth sidecar for the unlabeled set");
  app.add_option("--weak", o.weak, "Weak label file written by annotate");
  app.add_option("--vocab", o.vocab, "Vocabulary file");
  app.add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  app.add_option("--model", o.model_kind, "detector or annotator (dump-features)")->capture_default_str();
  app.add_option("--split", o.split, "Split tag for dump-features rows");
  auto* cutoff = app.add_option("--cutoff-timestamp", o.cutoff, "Split labeled data at this timestamp");
  app.add_option("--field-map", o.field_map, "Dataset field names, e.g. id=news_id")->delimiter(',');
  app.add_option("--jobs", o.jobs, "Parallel per-seed processes")->capture_default_str();
  app.add_option("--probes", o.probes, "Gradient probes per model")->capture_default_str();

  using Handler = int (*)(const CLI::App&, const Options&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
      {"gen-data", "Generate a synthetic corpus", cmd_gen_data},
      {"stats", "Dataset statistics per split and class", cmd_stats},
      {"train-annotator", "Train the report annotator", cmd_train_annotator},
      {"annotate", "Weakly label documents with a trained annotator", cmd_annotate},
      {"select", "Run the reinforced selector over weak labels", cmd_select},
      {"train-detector", "Train a content detector in one mode", cmd_train_detector},
      {"run-experiment", "Compare modes over seeds", cmd_run_experiment},
      {"shift-analysis", "Same-time vs different-time accuracy gaps", cmd_shift_analysis},
      {"dump-features", "Export latent feature vectors as CSV", cmd_dump_features},
      {"grad-check", "Finite-difference gradient audit", cmd_grad_check},
  };
  std::map<const CLI::App*, Handler> handlers;
  for (const auto& [name, help, fn] : commands) handlers[app.add_subcommand(name, help)] = fn;

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  o.has_cutoff = cutoff->count() > 0;

  const auto subs = app.get_subcommands();
  if (subs.empty()) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    fs::create_directories(o.out_dir);
    return handlers.at(subs.front())(app, o);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
}
