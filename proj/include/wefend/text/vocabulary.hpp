#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wefend/errors.hpp"

namespace wefend {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr std::size_t kDefaultMaxLen = 30;

/// Fixed-length id sequence, PAD-filled on the right.
struct TokenSequence {
  std::vector<int> ids;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Lowercase ASCII letters; multi-byte UTF-8 passes through unchanged.
inline std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

class Vocabulary {
 public:
  Vocabulary() : id_to_token_{"<pad>", "<unk>"} {}

  std::size_t size() const { return id_to_token_.size(); }

  /// Returns UNK for unseen tokens. Expects an already-lowercased token.
  int id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }

  const std::string& token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// Appends a token if absent and returns its id.
  int add(const std::string& token) {
    auto [it, inserted] = token_to_id_.emplace(token, static_cast<int>(id_to_token_.size()));
    if (inserted) id_to_token_.push_back(token);
    return it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

  /// One token per line in id order, reserved entries included.
  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& t : id_to_token_) os << t << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (lineno <= 2) {
        if (line != v.id_to_token_[lineno - 1])
          throw ParseError("vocabulary must start with <pad> and <unk>", lineno);
        continue;
      }
      if (line.empty() || v.contains(line)) throw ParseError("empty or duplicate token", lineno);
      v.add(line);
    }
    return v;
  }

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

/// Lowercase, map to ids (OOV -> UNK), truncate or PAD-fill to max_len.
inline TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                              std::size_t max_len = kDefaultMaxLen) {
  TokenSequence seq;
  seq.ids.assign(max_len, kPadId);
  std::size_t pos = 0;
  for (const auto& tok : split_whitespace(text)) {
    if (pos == max_len) break;
    seq.ids[pos++] = vocab.id(lowercase(tok));
  }
  return seq;
}

/// Inverse of tokenize over non-PAD ids (UNK renders as "<unk>").
inline std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (int id : seq.ids) {
    if (id == kPadId) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

/// Tokens with count >= min_count, ordered by (-count, token), ids from 2 upward.
template <typename Range>
Vocabulary build_vocab(const Range& corpus, std::size_t min_count = 1) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus)
    for (const auto& tok : split_whitespace(text)) ++counts[lowercase(tok)];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts)
    if (n >= min_count && tok != "<pad>" && tok != "<unk>") kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  for (const auto& [tok, n] : kept) vocab.add(tok);
  return vocab;
}

}  // namespace wefend
