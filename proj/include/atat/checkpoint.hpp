#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "atat/graph.hpp"

namespace atat {

// Checkpoint container: magic "ATAT", u32 version, u32 entry count, then per
// entry (u32 name length, UTF-8 name, u32 rank, u32 dims, f32 little-endian
// payload). Entries follow registry order so round trips are bit-exact.

namespace ckpt_detail {

inline void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32(os, u);
}

inline float get_f32(std::istream& is) {
  uint32_t u = get_u32(is);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace ckpt_detail

constexpr uint32_t kCheckpointVersion = 1;

template <class S>
void save_checkpoint(const ParameterStore<S>& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), Errc::IoError, "cannot open checkpoint for writing: " + path);
  os.write("ATAT", 4);
  ckpt_detail::put_u32(os, kCheckpointVersion);
  ckpt_detail::put_u32(os, static_cast<uint32_t>(params.size()));
  for (size_t i = 0; i < params.size(); ++i) {
    const Parameter<S>& p = params.at(i);
    ckpt_detail::put_u32(os, static_cast<uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    ckpt_detail::put_u32(os, static_cast<uint32_t>(p.value.rank()));
    for (Index d = 0; d < p.value.rank(); ++d)
      ckpt_detail::put_u32(os, static_cast<uint32_t>(p.value.dim(d)));
    for (Index e = 0; e < p.value.size(); ++e)
      ckpt_detail::put_f32(os, static_cast<float>(p.value[e]));
  }
  require(os.good(), Errc::IoError, "checkpoint write failed: " + path);
}

// Loads into an existing registry; every file entry must match a registered
// parameter by name and shape.
template <class S>
void load_checkpoint(ParameterStore<S>& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), Errc::ConfigError, "cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  require(is.good() && std::memcmp(magic, "ATAT", 4) == 0, Errc::ConfigError,
          "bad checkpoint magic: " + path);
  const uint32_t version = ckpt_detail::get_u32(is);
  require(version == kCheckpointVersion, Errc::ConfigError,
          "unsupported checkpoint version in " + path);
  const uint32_t count = ckpt_detail::get_u32(is);
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = ckpt_detail::get_u32(is);
    require(is.good() && name_len < (1u << 20), Errc::FormatError, "corrupt checkpoint entry");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const uint32_t rank = ckpt_detail::get_u32(is);
    require(is.good() && rank <= 8, Errc::FormatError, "corrupt checkpoint rank");
    Shape shape;
    Index total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<Index>(ckpt_detail::get_u32(is)));
      total *= shape.back();
    }
    require(params.has(name), Errc::ConfigError, "checkpoint entry has no target: " + name);
    Parameter<S>& p = params.get(name);
    require(p.value.shape() == shape, Errc::ConfigError, "checkpoint shape mismatch for " + name);
    for (Index e = 0; e < total; ++e) p.value[e] = static_cast<S>(ckpt_detail::get_f32(is));
    require(is.good(), Errc::FormatError, "truncated checkpoint payload in " + path);
  }
}

}  // namespace atat
