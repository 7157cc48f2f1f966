#pragma once

// Little-endian primitive readers and writers shared by the checkpoint and
// sample record formats.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "mlstm/error.hpp"

namespace mlstm::binio {

template <typename U>
void put_le(std::ostream& os, U v) {
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw SchemaError("unexpected end of binary stream");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put_le<std::uint8_t>(os, v); }
inline void put_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
inline void put_i64(std::ostream& os, std::int64_t v) {
  put_le(os, static_cast<std::uint64_t>(v));
}
inline void put_u64(std::ostream& os, std::uint64_t v) { put_le(os, v); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
inline void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint8_t get_u8(std::istream& is) { return get_le<std::uint8_t>(is); }
inline std::uint32_t get_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
inline std::uint64_t get_u64(std::istream& is) { return get_le<std::uint64_t>(is); }
inline std::int64_t get_i64(std::istream& is) {
  return static_cast<std::int64_t>(get_le<std::uint64_t>(is));
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }
inline std::string get_str(std::istream& is, std::uint32_t max_len = 1u << 16) {
  const std::uint32_t n = get_u32(is);
  if (n > max_len) throw SchemaError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw SchemaError("unexpected end of binary stream");
  return s;
}

}  // namespace mlstm::binio
