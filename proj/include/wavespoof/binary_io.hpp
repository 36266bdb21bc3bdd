#pragma once

// Little-endian fixed-width helpers shared by the binary artifact formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string_view>

#include "wavespoof/errors.hpp"

namespace wavespoof::io {

static_assert(std::endian::native == std::endian::little,
              "binary artifact writers assume a little-endian host");

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  char buf[16] = {};
  in.read(buf, static_cast<std::streamsize>(magic.size()));
  if (!in || std::string_view(buf, magic.size()) != magic) {
    throw InvalidInput("bad magic, expected " + std::string(magic));
  }
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw InvalidInput("truncated binary artifact");
  return value;
}

inline void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::istream& in, double* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw InvalidInput("truncated binary artifact");
}

}  // namespace wavespoof::io
