#pragma once

// Binary checkpoint layout (all integers little-endian, doubles IEEE-754
// binary64 little-endian):
//
//   bytes 0..7   magic "CPLYCKPT"
//   u32          format version (1)
//   u64          parameter version counter
//   u32          metadata length M, then M bytes of UTF-8 metadata (JSON)
//   u32          array count A
//   A times:
//     u32        name length L, then L bytes of name
//     u32 rows, u32 cols
//     rows*cols  f64 values, column-major

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "coplay/netcore/tensor.hpp"

namespace coplay::nn {

inline constexpr char kCheckpointMagic[8] = {'C', 'P', 'L', 'Y', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointFormat = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

inline std::uint64_t get_bytes(std::istream& is, int n) {
  unsigned char b[8] = {};
  is.read(reinterpret_cast<char*>(b), n);
  if (!is) throw std::runtime_error("checkpoint: truncated input");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline std::uint32_t get_u32(std::istream& is) { return static_cast<std::uint32_t>(get_bytes(is, 4)); }
inline std::uint64_t get_u64(std::istream& is) { return get_bytes(is, 8); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::string get_string(std::istream& is, std::uint32_t limit = 1u << 28) {
  const std::uint32_t n = get_u32(is);
  if (n > limit) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ParamSet& params, const std::string& metadata) {
  os.write(kCheckpointMagic, 8);
  detail::put_u32(os, kCheckpointFormat);
  detail::put_u64(os, params.version());
  detail::put_u32(os, static_cast<std::uint32_t>(metadata.size()));
  os.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    detail::put_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(e.value.rows()));
    detail::put_u32(os, static_cast<std::uint32_t>(e.value.cols()));
    for (Eigen::Index i = 0; i < e.value.size(); ++i) detail::put_f64(os, e.value.data()[i]);
  }
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

struct LoadedCheckpoint {
  ParamSet params;
  std::string metadata;
};

inline LoadedCheckpoint read_checkpoint(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const std::uint32_t fmt = detail::get_u32(is);
  if (fmt != kCheckpointFormat) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(fmt));
  }
  LoadedCheckpoint out;
  const std::uint64_t version = detail::get_u64(is);
  out.metadata = detail::get_string(is);
  const std::uint32_t count = detail::get_u32(is);
  for (std::uint32_t a = 0; a < count; ++a) {
    std::string name = detail::get_string(is, 4096);
    const std::uint32_t rows = detail::get_u32(is);
    const std::uint32_t cols = detail::get_u32(is);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 32)) {
      throw std::runtime_error("checkpoint: implausible array size for '" + name + "'");
    }
    Matrix& m = out.params.add(std::move(name), rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = detail::get_f64(is);
  }
  out.params.set_version(version);
  if (!out.params.all_finite()) throw std::runtime_error("checkpoint: non-finite parameters");
  return out;
}

inline void save_checkpoint_file(const std::string& path, const ParamSet& params,
                                 const std::string& metadata) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  write_checkpoint(os, params, metadata);
}

inline LoadedCheckpoint load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace coplay::nn
