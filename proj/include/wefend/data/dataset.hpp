#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "wefend/errors.hpp"
#include "wefend/model/annotator.hpp"
#include "wefend/model/detector.hpp"
#include "wefend/text/vocabulary.hpp"

namespace wefend {

/// One news item. `label` is 1 = fake, 0 = real, absent for unlabeled news.
struct Document {
  std::string id;
  std::string text;
  std::vector<std::string> reports;
  std::optional<int> label;
  std::int64_t timestamp = 0;

  friend bool operator==(const Document&, const Document&) = default;
};

struct Dataset {
  std::string name;
  std::vector<Document> documents;

  std::size_t size() const { return documents.size(); }
  bool empty() const { return documents.empty(); }
};

/// Field names used in the line-delimited record format. Defaults match the
/// files this project writes; override to read differently-keyed exports.
struct FieldMap {
  std::string id = "id";
  std::string text = "text";
  std::string reports = "reports";
  std::string label = "label";
  std::string timestamp = "timestamp";
};

inline void check_unique_ids(const Dataset& ds) {
  std::unordered_set<std::string> seen;
  for (const auto& d : ds.documents)
    if (!seen.insert(d.id).second) throw IntegrityError("duplicate document id '" + d.id + "' in " + ds.name);
}

inline Document parse_document(const std::string& line, std::size_t lineno, const FieldMap& fields = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
  }
  if (!j.is_object()) throw ParseError("record is not an object", lineno);
  Document d;
  try {
    if (!j.contains(fields.id) || !j[fields.id].is_string()) throw ParseError("missing string field '" + fields.id + "'", lineno);
    d.id = j[fields.id].get<std::string>();
    if (!j.contains(fields.text) || !j[fields.text].is_string())
      throw ParseError("missing string field '" + fields.text + "'", lineno);
    d.text = j[fields.text].get<std::string>();
    if (j.contains(fields.reports)) {
      const auto& r = j[fields.reports];
      if (!r.is_array()) throw ParseError("'" + fields.reports + "' must be an array", lineno);
      for (const auto& s : r) {
        if (!s.is_string()) throw ParseError("report entries must be strings", lineno);
        d.reports.push_back(s.get<std::string>());
      }
    }
    if (j.contains(fields.label) && !j[fields.label].is_null()) {
      const auto& l = j[fields.label];
      if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1))
        throw ParseError("'" + fields.label + "' must be 0 or 1", lineno);
      d.label = l.get<int>();
    }
    if (!j.contains(fields.timestamp) || !j[fields.timestamp].is_number_integer())
      throw ParseError("missing integer field '" + fields.timestamp + "'", lineno);
    d.timestamp = j[fields.timestamp].get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), lineno);
  }
  return d;
}

inline std::string serialize_document(const Document& d) {
  nlohmann::ordered_json j;
  j["id"] = d.id;
  j["text"] = d.text;
  j["reports"] = d.reports;
  if (d.label) j["label"] = *d.label;
  j["timestamp"] = d.timestamp;
  return j.dump();
}

inline Dataset read_dataset(std::istream& is, std::string name, const FieldMap& fields = {}) {
  Dataset ds;
  ds.name = std::move(name);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ds.documents.push_back(parse_document(line, lineno, fields));
  }
  check_unique_ids(ds);
  return ds;
}

inline Dataset load_dataset(const std::string& path, const FieldMap& fields = {}) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_dataset(is, path, fields);
}

inline void write_dataset(std::ostream& os, const Dataset& ds) {
  for (const auto& d : ds.documents) os << serialize_document(d) << '\n';
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset(os, ds);
}

/// Sidecar ground truth: "id<TAB>label" per line.
inline void save_truth(const std::string& path, const std::vector<std::pair<std::string, int>>& truth) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& [id, label] : truth) os << id << '\t' << label << '\n';
}

inline std::map<std::string, int> load_truth(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::map<std::string, int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected id<TAB>label", lineno);
    const std::string label = line.substr(tab + 1);
    if (label != "0" && label != "1") throw ParseError("label must be 0 or 1", lineno);
    if (!out.emplace(line.substr(0, tab), label == "1").second) throw IntegrityError("duplicate id in truth file");
  }
  return out;
}

struct TimestampSplit {
  Dataset train;
  Dataset test;
};

/// train = {t < cutoff}, test = {t >= cutoff}; order within each side preserved.
inline TimestampSplit split_by_timestamp(const Dataset& ds, std::int64_t cutoff) {
  TimestampSplit out;
  out.train.name = ds.name + ":train";
  out.test.name = ds.name + ":test";
  for (const auto& d : ds.documents) (d.timestamp < cutoff ? out.train : out.test).documents.push_back(d);
  if (!out.train.empty() && !out.test.empty()) {
    std::int64_t max_train = out.train.documents.front().timestamp;
    std::int64_t min_test = out.test.documents.front().timestamp;
    for (const auto& d : out.train.documents) max_train = std::max(max_train, d.timestamp);
    for (const auto& d : out.test.documents) min_test = std::min(min_test, d.timestamp);
    if (!(max_train < min_test)) throw IntegrityError("timestamp split overlaps");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics in the layout of the corpus summary table
// ---------------------------------------------------------------------------

struct StatsRow {
  std::string split;
  std::string cls;  // "fake", "real", "-" (unlabeled) or "all"
  std::size_t news = 0;
  std::size_t reports = 0;
  double avg_reports() const { return news ? static_cast<double>(reports) / static_cast<double>(news) : 0.0; }
};

/// Per-class rows for labeled documents and one "-" row for unlabeled ones.
/// An empty dataset yields a single all-zero row.
inline std::vector<StatsRow> dataset_stats(const Dataset& ds, const std::string& split_name) {
  StatsRow fake{split_name, "fake"}, real{split_name, "real"}, unl{split_name, "-"};
  for (const auto& d : ds.documents) {
    StatsRow& r = !d.label ? unl : (*d.label == 1 ? fake : real);
    ++r.news;
    r.reports += d.reports.size();
  }
  std::vector<StatsRow> rows;
  if (unl.news) rows.push_back(unl);
  if (fake.news) rows.push_back(fake);
  if (real.news) rows.push_back(real);
  if (rows.empty()) rows.push_back({split_name, "all", 0, 0});
  return rows;
}

inline std::string format_stats(const std::vector<StatsRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "split" << std::setw(6) << "class" << std::right << std::setw(10) << "#news"
     << std::setw(10) << "#reports" << std::setw(14) << "avg_reports" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(22) << r.split << std::setw(6) << r.cls << std::right << std::setw(10) << r.news
       << std::setw(10) << r.reports << std::setw(14) << std::fixed << std::setprecision(2) << r.avg_reports()
       << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Encoding into model inputs
// ---------------------------------------------------------------------------

struct EncodingConfig {
  std::size_t content_max_len = kDefaultMaxLen;
  std::size_t report_max_len = kDefaultMaxLen;
};

/// Document with tokenized content and reports; label -1 when absent.
struct EncodedDoc {
  std::string id;
  TokenSequence content;
  ReportSet reports;
  int label = -1;
  std::int64_t timestamp = 0;
};

inline EncodedDoc encode(const Document& d, const Vocabulary& vocab, const EncodingConfig& cfg) {
  EncodedDoc e;
  e.id = d.id;
  e.content = tokenize(d.text, vocab, cfg.content_max_len);
  for (const auto& r : d.reports) e.reports.reports.push_back(tokenize(r, vocab, cfg.report_max_len));
  e.label = d.label ? *d.label : -1;
  e.timestamp = d.timestamp;
  return e;
}

inline std::vector<EncodedDoc> encode_all(const Dataset& ds, const Vocabulary& vocab, const EncodingConfig& cfg) {
  std::vector<EncodedDoc> out;
  out.reserve(ds.size());
  for (const auto& d : ds.documents) out.push_back(encode(d, vocab, cfg));
  return out;
}

/// Every text (content and reports) in the given datasets, for vocabulary building.
inline std::vector<std::string> corpus_texts(std::initializer_list<const Dataset*> sets) {
  std::vector<std::string> out;
  for (const Dataset* ds : sets)
    for (const auto& d : ds->documents) {
      out.push_back(d.text);
      for (const auto& r : d.reports) out.push_back(r);
    }
  return out;
}

inline std::vector<Example> content_examples(const std::vector<EncodedDoc>& docs) {
  std::vector<Example> out;
  for (const auto& d : docs) {
    if (d.label < 0) throw PreconditionError("content_examples: document '" + d.id + "' is unlabeled");
    out.push_back({d.content, d.label});
  }
  return out;
}

/// Labeled documents that carry at least one report.
inline std::vector<LabeledReports> report_examples(const std::vector<EncodedDoc>& docs) {
  std::vector<LabeledReports> out;
  for (const auto& d : docs) {
    if (d.label < 0) throw PreconditionError("report_examples: document '" + d.id + "' is unlabeled");
    if (!d.reports.reports.empty()) out.push_back({d.reports, d.label});
  }
  return out;
}

}  // namespace wefend
