#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpad {

// Bad or inconsistent input data (files, manifests, shape mismatches).
// Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical guarantee was violated at runtime (non-monotone EM,
// unrecoverable degenerate component, ...). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

static_assert(std::endian::native == std::endian::little,
              "binary file formats assume a little-endian host");

// ---- little-endian binary i/o ------------------------------------------

template <typename T>
inline void write_raw(std::ostream& os, const T& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
inline void write_raw(std::ostream& os, const std::vector<T>& v) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
inline T read_raw(std::istream& is, const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError(std::string("truncated file while reading ") + what);
  return v;
}

template <typename T>
inline void read_raw(std::istream& is, std::vector<T>& v, std::size_t n,
                     const char* what) {
  static_assert(std::is_trivially_copyable_v<T>);
  v.resize(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(T)));
  if (!is) throw DataError(std::string("truncated file while reading ") + what);
}

inline void write_magic(std::ostream& os, const char magic[5]) {
  os.write(magic, 4);
}

inline void expect_magic(std::istream& is, const char magic[5],
                         const std::string& path) {
  char buf[4];
  is.read(buf, 4);
  if (!is || std::memcmp(buf, magic, 4) != 0)
    throw DataError(path + ": not a " + magic + " file");
}

// FNV-1a, used for stable config hashing and stage-seed derivation.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

}  // namespace fpad
