#pragma once

// Little-endian primitives for the model and checkpoint files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "eidgm/errors.hpp"

namespace eidgm::binio {

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw IoError("unexpected end of binary file");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void put_u32(std::ostream& out, std::size_t v) { put<std::uint32_t>(out, static_cast<std::uint32_t>(v)); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put<std::uint64_t>(out, v); }
inline void put_f64(std::ostream& out, double v) { put<double>(out, v); }
inline std::uint32_t get_u32(std::istream& in) { return get<std::uint32_t>(in); }
inline std::uint64_t get_u64(std::istream& in) { return get<std::uint64_t>(in); }
inline double get_f64(std::istream& in) { return get<double>(in); }

inline void put_f64s(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) put_f64(out, x);
}

inline std::vector<double> get_f64s(std::istream& in, std::size_t n) {
  if (n > (std::size_t{1} << 32)) throw IoError("implausible array length in binary file");
  std::vector<double> v(n);
  for (auto& x : v) x = get_f64(in);
  return v;
}

inline void put_magic(std::ostream& out, const char (&magic)[9]) { out.write(magic, 8); }

inline void expect_magic(std::istream& in, const char (&magic)[9]) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
    throw IoError(std::string("not a ") + magic + " file");
  }
}

inline void put_sizes(std::ostream& out, const std::vector<std::size_t>& sizes) {
  put_u32(out, sizes.size());
  for (auto s : sizes) put_u32(out, s);
}

inline std::vector<std::size_t> get_sizes(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  if (n > 4096) throw IoError("implausible layer count in binary file");
  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) s = get_u32(in);
  return sizes;
}

}  // namespace eidgm::binio
