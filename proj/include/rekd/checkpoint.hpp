// Copyright 2026 The ReKD Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REKD_CHECKPOINT_HPP_
#define REKD_CHECKPOINT_HPP_

// Binary layout, all integers little-endian:
//   "REKD"  u32 version  u32 count
//   count x { u16 name_len, name bytes (UTF-8), u32 rows, u32 cols,
//             rows*cols f64 row-major }

#include <bit>
#include <type_traits>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rekd/encoder.hpp"
#include "rekd/numerics.hpp"

namespace rekd {

inline constexpr char kCheckpointMagic[4] = {'R', 'E', 'K', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedMatrix {
  std::string name;
  Matrix value;
};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw std::runtime_error("checkpoint: unexpected end of stream");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const std::vector<NamedMatrix>& mats) {
  os.write(kCheckpointMagic, 4);
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(mats.size()));
  for (const auto& [name, m] : mats) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max())
      throw std::invalid_argument("checkpoint: matrix name too long");
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) detail::put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

inline std::vector<NamedMatrix> read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const auto count = detail::get_le<std::uint32_t>(is);
  std::vector<NamedMatrix> out;
  out.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = detail::get_le<std::uint16_t>(is);
    std::string name(len, '\0');
    if (len && !is.read(name.data(), len)) throw std::runtime_error("checkpoint: truncated name");
    const auto rows = detail::get_le<std::uint32_t>(is);
    const auto cols = detail::get_le<std::uint32_t>(is);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = std::bit_cast<double>(detail::get_le<std::uint64_t>(is));
    out.push_back({std::move(name), std::move(m)});
  }
  return out;
}

inline void save_checkpoint(const std::string& path, const std::vector<NamedMatrix>& mats) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  write_checkpoint(os, mats);
}

inline std::vector<NamedMatrix> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_checkpoint(is);
}

/// Appends `<prefix>.w<l>` / `<prefix>.b<l>` entries for every layer.
inline void append_encoder(std::vector<NamedMatrix>& out, const std::string& prefix,
                           const MlpEncoder& enc) {
  for (std::size_t l = 0; l < enc.num_layers(); ++l) {
    out.push_back({prefix + ".w" + std::to_string(l), enc.weight(l)});
    out.push_back({prefix + ".b" + std::to_string(l), enc.bias(l)});
  }
}

inline MlpEncoder extract_encoder(const std::vector<NamedMatrix>& mats, const std::string& prefix) {
  auto find = [&](const std::string& name) -> const Matrix* {
    for (const auto& nm : mats)
      if (nm.name == name) return &nm.value;
    return nullptr;
  };
  std::vector<Matrix> ws, bs;
  for (std::size_t l = 0;; ++l) {
    const Matrix* w = find(prefix + ".w" + std::to_string(l));
    const Matrix* b = find(prefix + ".b" + std::to_string(l));
    if (!w || !b) break;
    ws.push_back(*w);
    bs.push_back(*b);
  }
  if (ws.empty()) throw std::runtime_error("checkpoint: no encoder named '" + prefix + "'");
  return MlpEncoder::from_parameters(std::move(ws), std::move(bs));
}

}  // namespace rekd

#endif  // REKD_CHECKPOINT_HPP_
