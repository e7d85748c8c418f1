#pragma once

#include <filesystem>
#include <string>

#include "wefend/wefend.hpp"

namespace wefend::testing {

inline ExtractorConfig small_extractor(std::size_t dim = 6) {
  ExtractorConfig cfg;
  cfg.embedding_dim = dim;
  return cfg;
}

inline TokenSequence random_tokens(std::size_t len, std::size_t vocab, Rng& rng) {
  TokenSequence s;
  for (std::size_t i = 0; i < len; ++i) s.ids.push_back(static_cast<int>(2 + rng.below(vocab - 2)));
  return s;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("wefend-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace wefend::testing
