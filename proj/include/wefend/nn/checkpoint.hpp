#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "wefend/errors.hpp"
#include "wefend/nn/tensor.hpp"

// Binary checkpoint layout (all integers little-endian):
//   "WFND" | u32 version | u32 parameter count
//   per parameter: u32 name length | UTF-8 name | u32 rank | u64 dims[rank] | f64 values[]
// Only values are stored; Adam moments and gradients are not.

namespace wefend {

inline constexpr char kCheckpointMagic[4] = {'W', 'F', 'N', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ParseError("checkpoint truncated", 0);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ParameterRefs& params) {
  os.write(kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& np : params) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(np.name.size()));
    os.write(np.name.data(), static_cast<std::streamsize>(np.name.size()));
    const auto& shape = np.param->shape();
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) detail::put_le<std::uint64_t>(os, d);
    for (double v : np.param->value.values()) detail::put_le<double>(os, v);
  }
}

/// Name -> tensor, in file order preserved via the vector.
using CheckpointEntries = std::vector<std::pair<std::string, Tensor>>;

inline CheckpointEntries read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw ParseError("not a checkpoint file (bad magic)", 0);
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 0);
  const auto n = detail::get_le<std::uint32_t>(is);
  CheckpointEntries out;
  out.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto len = detail::get_le<std::uint32_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw ParseError("checkpoint truncated in name", 0);
    const auto rank = detail::get_le<std::uint32_t>(is);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(detail::get_le<std::uint64_t>(is));
    std::vector<double> values(Tensor::count(shape));
    for (double& v : values) v = detail::get_le<double>(is);
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const ParameterRefs& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_checkpoint(os, params);
}

inline CheckpointEntries load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_checkpoint(is);
}

/// Copy checkpoint values into an already-shaped parameter set; names and shapes must match.
inline void assign_checkpoint(const CheckpointEntries& entries, const ParameterRefs& params) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : entries) by_name[name] = &t;
  for (const auto& np : params) {
    auto it = by_name.find(np.name);
    if (it == by_name.end()) throw ParseError("checkpoint lacks parameter '" + np.name + "'", 0);
    if (it->second->shape() != np.param->shape())
      throw DimensionError("checkpoint parameter '" + np.name + "' has shape " +
                           Tensor::shape_string(it->second->shape()) + ", expected " +
                           Tensor::shape_string(np.param->shape()));
    np.param->value = *it->second;
    np.param->zero_grad();
    np.param->reset_moments();
  }
}

inline const Tensor& checkpoint_entry(const CheckpointEntries& entries, const std::string& name) {
  for (const auto& [n, t] : entries)
    if (n == name) return t;
  throw ParseError("checkpoint lacks parameter '" + name + "'", 0);
}

}  // namespace wefend
