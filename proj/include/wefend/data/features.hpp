#pragma once

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "wefend/data/dataset.hpp"
#include "wefend/model/annotator.hpp"
#include "wefend/model/detector.hpp"

namespace wefend {

/// Writes "id,split,label,f0..f{n-1}" rows. `features` returns the latent
/// vector of a document, or an empty vector when it has none (written as NA).
template <typename FeatureFn>
void write_features(std::ostream& os, const std::vector<EncodedDoc>& docs, const std::string& split,
                    std::size_t dim, FeatureFn&& features, bool header = true) {
  if (header) {
    os << "id,split,label";
    for (std::size_t j = 0; j < dim; ++j) os << ",f" << j;
    os << '\n';
  }
  os << std::setprecision(9);
  for (const auto& d : docs) {
    os << d.id << ',' << split << ',';
    if (d.label >= 0) os << d.label;
    const std::vector<double> f = features(d);
    if (!f.empty() && f.size() != dim) throw DimensionError("write_features: feature width mismatch");
    for (std::size_t j = 0; j < dim; ++j) {
      os << ',';
      if (f.empty())
        os << "NA";
      else
        os << f[j];
    }
    os << '\n';
  }
}

/// Content-side latent vectors from a detector's extractor.
inline void dump_features(std::ostream& os, const std::vector<EncodedDoc>& docs, const std::string& split,
                          const Detector& model, bool header = true) {
  write_features(os, docs, split, model.extractor().config().output_dim,
                 [&](const EncodedDoc& d) { return model.latent(d.content); }, header);
}

/// Report-side latent vectors: the mean of the annotator's per-report
/// extractor outputs. Documents without reports get NA features.
inline void dump_features(std::ostream& os, const std::vector<EncodedDoc>& docs, const std::string& split,
                          const Annotator& model, bool header = true) {
  write_features(os, docs, split, model.extractor().config().output_dim,
                 [&](const EncodedDoc& d) {
                   if (d.reports.reports.empty()) return std::vector<double>{};
                   std::vector<std::vector<double>> feats;
                   for (const auto& r : d.reports.reports) feats.push_back(model.extractor().features(r, model.embedding()));
                   return mean_features(feats);
                 },
                 header);
}

template <typename Model>
void dump_features(const std::string& path, const std::vector<EncodedDoc>& docs, const std::string& split,
                   const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  dump_features(out, docs, split, model);
}

}  // namespace wefend
