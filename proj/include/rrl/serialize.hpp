#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "rrl/error.hpp"

// Little-endian binary primitives shared by the checkpoint and datastore
// formats.

namespace rrl::io {

inline void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  put_bytes(out, bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  require(in.gcount() == static_cast<std::streamsize>(sizeof(T)),
          "binary read: truncated file");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
      std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

inline std::string get_string(std::istream& in, std::size_t max_len = 1u << 24) {
  std::uint32_t n = get_le<std::uint32_t>(in);
  require(n <= max_len, "binary read: string length out of bounds");
  std::string s(n, '\0');
  in.read(s.data(), n);
  require(in.gcount() == static_cast<std::streamsize>(n),
          "binary read: truncated string");
  return s;
}

inline void check_magic(std::istream& in, const char (&magic)[9],
                        const std::string& what) {
  char got[8];
  in.read(got, 8);
  require(in.gcount() == 8 && std::memcmp(got, magic, 8) == 0,
          what + ": bad magic (not a " + what + " file)");
}

}  // namespace rrl::io
