// SPDX-License-Identifier: Apache-2.0

#ifndef GWSEG_SRC_BINARY_IO_HPP
#define GWSEG_SRC_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gwseg/common.hpp"

namespace gwseg::detail {

static_assert(std::endian::native == std::endian::little,
              "binary payloads assume a little-endian host");

inline void put_f32(std::string& out, float v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

inline void put_u16(std::string& out, std::uint16_t v) {
  char buf[2];
  std::memcpy(buf, &v, 2);
  out.append(buf, 2);
}

inline float get_f32(const char* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

inline std::uint16_t get_u16(const char* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

/// Splits off the first '\n'-terminated line; throws if absent.
inline std::string header_line(const std::string& bytes, std::size_t max_len = 4096) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos || nl > max_len) {
    throw FormatError("missing header line at byte offset 0");
  }
  return bytes.substr(0, nl);
}

}  // namespace gwseg::detail

#endif  // GWSEG_SRC_BINARY_IO_HPP
