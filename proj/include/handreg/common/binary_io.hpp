#pragma once
// Little-endian primitives for the checkpoint and shard formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "handreg/common/error.hpp"

namespace handreg::io {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void write_le(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  HANDREG_THROW_IF(!is, ErrorCode::Format, "unexpected end of binary stream");
  return to_little(v);
}

inline void write_bytes(std::ostream& os, std::string_view s) {
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_bytes(std::istream& is, std::size_t n) {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  HANDREG_THROW_IF(!is, ErrorCode::Format, "unexpected end of binary stream");
  return s;
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  const std::string got = read_bytes(is, magic.size());
  HANDREG_THROW_IF(got != magic, ErrorCode::Format,
                   "bad magic, expected '" + std::string(magic.substr(0, magic.size() - 1)) + "'");
}

}  // namespace handreg::io
