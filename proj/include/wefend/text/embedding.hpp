#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/nn/rng.hpp"
#include "wefend/nn/tensor.hpp"
#include "wefend/text/vocabulary.hpp"

namespace wefend {

inline constexpr std::size_t kDefaultEmbeddingDim = 200;
inline constexpr double kEmbeddingInitRange = 0.1;

/// Word-embedding matrix [V x d]. Row kPadId is held at zero: its gradient is
/// masked by every consumer, so Adam never moves it.
struct EmbeddingTable {
  Parameter matrix;
  bool trainable = true;

  std::size_t vocab_size() const { return matrix.value.dim(0); }
  std::size_t dim() const { return matrix.value.dim(1); }

  const double* row(int id) const { return matrix.value.data() + static_cast<std::size_t>(id) * dim(); }
  double* grad_row(int id) { return matrix.grad.data() + static_cast<std::size_t>(id) * dim(); }

  /// Uniform [-0.1, 0.1] rows, PAD row zero.
  static EmbeddingTable random(std::size_t vocab_size, std::size_t dim, Rng& rng) {
    EmbeddingTable t;
    t.matrix = Parameter(Tensor::uniform({vocab_size, dim}, -kEmbeddingInitRange, kEmbeddingInitRange, rng));
    for (std::size_t j = 0; j < dim; ++j) t.matrix.value.at(kPadId, j) = 0.0;
    return t;
  }
};

struct EmbeddingLoadResult {
  EmbeddingTable table;
  std::size_t covered = 0;  // vocabulary entries (excluding PAD/UNK) found in the file
  double coverage = 0.0;    // covered / |vocab|
};

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && std::isfinite(out);
}

inline bool is_unsigned_integer(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

}  // namespace detail

/// Read a plain-text word-vector file ("token v1 ... vd" per line, optional
/// "V d" header) into a table aligned with `vocab`. Tokens the file lacks keep
/// their seeded random initialisation.
inline EmbeddingLoadResult load_embeddings(std::istream& is, const Vocabulary& vocab, std::size_t dim, Rng& rng) {
  EmbeddingLoadResult result;
  result.table = EmbeddingTable::random(vocab.size(), dim, rng);
  std::unordered_set<int> seen;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (lineno == 1 && fields.size() == 2 && detail::is_unsigned_integer(fields[0]) &&
        detail::is_unsigned_integer(fields[1])) {
      if (std::stoul(fields[1]) != dim)
        throw ParseError("header declares dimension " + fields[1] + ", expected " + std::to_string(dim), lineno);
      continue;
    }
    if (fields.size() != dim + 1)
      throw ParseError("expected " + std::to_string(dim) + " values, found " + std::to_string(fields.size() - 1),
                       lineno);
    std::vector<double> vec(dim);
    for (std::size_t j = 0; j < dim; ++j)
      if (!detail::parse_double(fields[j + 1], vec[j]))
        throw ParseError("malformed number '" + fields[j + 1] + "'", lineno);

    const std::string tok = lowercase(fields[0]);
    if (!vocab.contains(tok)) continue;
    const int id = vocab.id(tok);
    if (id == kPadId || id == kUnkId) continue;
    for (std::size_t j = 0; j < dim; ++j) result.table.matrix.value.at(static_cast<std::size_t>(id), j) = vec[j];
    seen.insert(id);
  }
  result.covered = seen.size();
  result.coverage = static_cast<double>(result.covered) / static_cast<double>(vocab.size());
  return result;
}

inline EmbeddingLoadResult load_embeddings(const std::string& path, const Vocabulary& vocab, std::size_t dim,
                                           Rng& rng) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_embeddings(is, vocab, dim, rng);
}

}  // namespace wefend
