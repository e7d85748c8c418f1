#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/nn/ops.hpp"
#include "wefend/nn/tensor.hpp"
#include "wefend/text/embedding.hpp"
#include "wefend/text/vocabulary.hpp"

namespace wefend {

struct ExtractorConfig {
  std::vector<std::size_t> window_sizes{1, 2, 3, 4, 5, 6};
  std::size_t filters_per_window = 40;
  std::size_t output_dim = 40;
  std::size_t embedding_dim = kDefaultEmbeddingDim;

  std::size_t pooled_width() const { return window_sizes.size() * filters_per_window; }
  std::size_t max_window() const {
    return window_sizes.empty() ? 0 : *std::max_element(window_sizes.begin(), window_sizes.end());
  }

  void validate() const {
    if (window_sizes.empty() || filters_per_window == 0 || output_dim == 0 || embedding_dim == 0)
      throw ConfigError("extractor: window sizes, filter count, output and embedding dims must be non-zero");
    for (auto w : window_sizes)
      if (w == 0) throw ConfigError("extractor: window size 0");
  }
};

/// Scratch kept from a forward pass for the matching backward pass.
struct ExtractorCache {
  std::vector<int> ids;
  std::vector<double> embedded;    // [L x d]
  std::vector<double> pooled;      // [windows * filters], post-ReLU max over time
  std::vector<int> argmax;         // window start of each pooled max, -1 when pooled == 0
  std::vector<double> projected;   // [output_dim], pre-ReLU
  std::vector<double> output;      // [output_dim], post-ReLU
};

/// One-layer text CNN: per-window convolution banks, ReLU, max-over-time
/// pooling, then a bias-free projection with ReLU.
///
/// Filter bank for window w has shape [w*d x filters]; because embedded rows
/// are contiguous, the window starting at t is the flat slice [t*d, (t+w)*d).
class TextCnn {
 public:
  TextCnn() = default;

  TextCnn(ExtractorConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (auto w : cfg_.window_sizes)
      filters_.push_back(glorot_parameter(w * cfg_.embedding_dim, cfg_.filters_per_window, rng));
    projection_ = glorot_parameter(cfg_.pooled_width(), cfg_.output_dim, rng);
  }

  const ExtractorConfig& config() const { return cfg_; }
  std::vector<Parameter>& filters() { return filters_; }
  const std::vector<Parameter>& filters() const { return filters_; }
  Parameter& projection() { return projection_; }
  const Parameter& projection() const { return projection_; }

  void append_params(ParameterRefs& out, const std::string& prefix) {
    for (std::size_t k = 0; k < filters_.size(); ++k)
      out.push_back({prefix + "conv_w" + std::to_string(cfg_.window_sizes[k]), &filters_[k]});
    out.push_back({prefix + "projection", &projection_});
  }

  void set_zero() {
    for (auto& f : filters_) f.value.fill(0.0);
    projection_.value.fill(0.0);
  }

  void forward(const TokenSequence& seq, const EmbeddingTable& emb, ExtractorCache& cache) const {
    const std::size_t d = cfg_.embedding_dim;
    const std::size_t nf = cfg_.filters_per_window;
    const std::size_t len = seq.ids.size();
    if (emb.dim() != d)
      throw DimensionError("extractor expects embedding dim " + std::to_string(d) + ", table has " +
                           std::to_string(emb.dim()));
    if (len < cfg_.max_window())
      throw DimensionError("sequence length " + std::to_string(len) + " shorter than largest window " +
                           std::to_string(cfg_.max_window()));

    cache.ids = seq.ids;
    cache.embedded.resize(len * d);
    for (std::size_t t = 0; t < len; ++t) {
      const int id = seq.ids[t];
      if (id < 0 || static_cast<std::size_t>(id) >= emb.vocab_size())
        throw DimensionError("token id " + std::to_string(id) + " outside embedding table");
      std::copy_n(emb.row(id), d, cache.embedded.data() + t * d);
    }

    cache.pooled.assign(cfg_.pooled_width(), 0.0);
    cache.argmax.assign(cfg_.pooled_width(), -1);
    std::vector<double> z(nf);
    for (std::size_t k = 0; k < filters_.size(); ++k) {
      const std::size_t w = cfg_.window_sizes[k];
      const double* bank = filters_[k].value.data();
      double* pooled = cache.pooled.data() + k * nf;
      int* arg = cache.argmax.data() + k * nf;
      for (std::size_t t = 0; t + w <= len; ++t) {
        std::fill(z.begin(), z.end(), 0.0);
        matvec_accumulate({cache.embedded.data() + t * d, w * d}, bank, nf, z);
        for (std::size_t f = 0; f < nf; ++f) {
          // ReLU then max equals max then ReLU; only strictly positive maxima carry gradient.
          if (z[f] > pooled[f]) {
            pooled[f] = z[f];
            arg[f] = static_cast<int>(t);
          }
        }
      }
    }

    cache.projected.assign(cfg_.output_dim, 0.0);
    matvec_accumulate(cache.pooled, projection_.value.data(), cfg_.output_dim, cache.projected);
    cache.output.resize(cfg_.output_dim);
    for (std::size_t j = 0; j < cfg_.output_dim; ++j)
      cache.output[j] = cache.projected[j] > 0.0 ? cache.projected[j] : 0.0;
  }

  std::vector<double> features(const TokenSequence& seq, const EmbeddingTable& emb) const {
    ExtractorCache cache;
    forward(seq, emb, cache);
    return cache.output;
  }

  /// Accumulate parameter gradients (and embedding-row gradients, PAD masked)
  /// given dL/d(output).
  void backward(const ExtractorCache& cache, std::span<const double> grad_out, EmbeddingTable& emb) {
    const std::size_t d = cfg_.embedding_dim;
    const std::size_t nf = cfg_.filters_per_window;
    const std::size_t width = cfg_.pooled_width();
    const std::size_t out = cfg_.output_dim;

    std::vector<double> grad_proj(out);
    bool any = false;
    for (std::size_t j = 0; j < out; ++j) {
      grad_proj[j] = cache.projected[j] > 0.0 ? grad_out[j] : 0.0;
      any = any || grad_proj[j] != 0.0;
    }
    if (!any) return;

    std::vector<double> grad_pooled(width, 0.0);
    const double* pw = projection_.value.data();
    double* pg = projection_.grad.data();
    for (std::size_t i = 0; i < width; ++i) {
      const double pi = cache.pooled[i];
      double acc = 0.0;
      for (std::size_t j = 0; j < out; ++j) {
        pg[i * out + j] += pi * grad_proj[j];
        acc += pw[i * out + j] * grad_proj[j];
      }
      grad_pooled[i] = acc;
    }

    std::vector<double> grad_embedded(emb.trainable ? cache.embedded.size() : 0, 0.0);
    for (std::size_t k = 0; k < filters_.size(); ++k) {
      const std::size_t w = cfg_.window_sizes[k];
      const double* bank = filters_[k].value.data();
      double* bank_grad = filters_[k].grad.data();
      for (std::size_t f = 0; f < nf; ++f) {
        const int t = cache.argmax[k * nf + f];
        const double g = grad_pooled[k * nf + f];
        if (t < 0 || g == 0.0) continue;
        const double* window = cache.embedded.data() + static_cast<std::size_t>(t) * d;
        for (std::size_t j = 0; j < w * d; ++j) bank_grad[j * nf + f] += g * window[j];
        if (emb.trainable) {
          double* gw = grad_embedded.data() + static_cast<std::size_t>(t) * d;
          for (std::size_t j = 0; j < w * d; ++j) gw[j] += g * bank[j * nf + f];
        }
      }
    }

    if (!emb.trainable) return;
    for (std::size_t t = 0; t < cache.ids.size(); ++t) {
      const int id = cache.ids[t];
      if (id == kPadId) continue;
      double* row = emb.grad_row(id);
      const double* g = grad_embedded.data() + t * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += g[j];
    }
  }

 private:
  ExtractorConfig cfg_;
  std::vector<Parameter> filters_;
  Parameter projection_;
};

}  // namespace wefend
