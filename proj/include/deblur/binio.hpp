#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "deblur/errors.hpp"

// Little-endian binary primitives shared by the raw-image container and the
// model checkpoint format.
namespace deblur::binio {

inline void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
  in.read(dst, std::streamsize(n));
  if (std::size_t(in.gcount()) != n)
    throw IoError(std::string("short read in ") + what);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
               char((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4, what);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

inline void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int k = 0; k < 8; ++k) b[k] = char((bits >> (8 * k)) & 0xff);
  out.write(b, 8);
}

inline double get_f64(std::istream& in, const char* what) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8, what);
  std::uint64_t bits = 0;
  for (int k = 7; k >= 0; --k) bits = (bits << 8) | b[k];
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, std::uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

inline std::string get_string(std::istream& in, const char* what) {
  std::uint32_t n = get_u32(in, what);
  std::string s(n, '\0');
  if (n) read_exact(in, s.data(), n, what);
  return s;
}

}  // namespace deblur::binio
