#pragma once

#include <algorithm>
#include <string>

#include "wefend/model/annotator.hpp"
#include "wefend/model/detector.hpp"
#include "wefend/nn/checkpoint.hpp"

namespace wefend {

/// Recover the extractor shape from checkpoint tensors: embedding [V x d],
/// extractor.conv_w{w} [w*d x filters], extractor.projection [pooled x out].
inline ExtractorConfig infer_extractor_config(const CheckpointEntries& entries) {
  const Tensor& emb = checkpoint_entry(entries, "embedding");
  if (emb.rank() != 2) throw DimensionError("checkpoint embedding must be rank 2");
  ExtractorConfig cfg;
  cfg.embedding_dim = emb.dim(1);
  cfg.window_sizes.clear();
  const std::string prefix = "extractor.conv_w";
  for (const auto& [name, t] : entries) {
    if (name.rfind(prefix, 0) != 0) continue;
    const std::size_t w = std::stoul(name.substr(prefix.size()));
    if (t.rank() != 2 || t.dim(0) != w * cfg.embedding_dim)
      throw DimensionError("checkpoint filter bank '" + name + "' has shape " + Tensor::shape_string(t.shape()));
    cfg.window_sizes.push_back(w);
    cfg.filters_per_window = t.dim(1);
  }
  std::sort(cfg.window_sizes.begin(), cfg.window_sizes.end());
  cfg.output_dim = checkpoint_entry(entries, "extractor.projection").dim(1);
  cfg.validate();
  return cfg;
}

template <typename Model>
Model model_from_checkpoint(const CheckpointEntries& entries) {
  const ExtractorConfig cfg = infer_extractor_config(entries);
  Rng scratch(0);
  const std::size_t vocab = checkpoint_entry(entries, "embedding").dim(0);
  Model model(EmbeddingTable::random(vocab, cfg.embedding_dim, scratch), cfg, scratch);
  assign_checkpoint(entries, model.params());
  return model;
}

inline Detector load_detector(const std::string& path) { return model_from_checkpoint<Detector>(load_checkpoint_file(path)); }
inline Annotator load_annotator(const std::string& path) {
  return model_from_checkpoint<Annotator>(load_checkpoint_file(path));
}

template <typename Model>
void save_model(const std::string& path, Model& model) {
  save_checkpoint(path, model.params());
}

}  // namespace wefend
