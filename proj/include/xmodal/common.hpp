#pragma once

#include <cstdint>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xmodal {

// Formatted error: fail("conv2d", "kernel must be odd, got ", k)
template <class... Parts>
[[noreturn]] inline void fail(const char* where, Parts&&... parts) {
  std::ostringstream os;
  os << where << ": ";
  (os << ... << parts);
  throw std::runtime_error(os.str());
}

template <class... Parts>
inline std::string cat(Parts&&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

// FNV-1a 64-bit. Used for content hashes, file checksums and seed derivation.
inline uint64_t fnv1a64(const void* data, size_t n,
                        uint64_t h = 1469598103934665603ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 1469598103934665603ull) {
  return fnv1a64(s.data(), s.size(), h);
}

inline uint64_t fnv1a64(const std::vector<double>& v, uint64_t h = 1469598103934665603ull) {
  return v.empty() ? h : fnv1a64(v.data(), v.size() * sizeof(double), h);
}

inline std::string to_hex(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace xmodal
