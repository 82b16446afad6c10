#pragma once

#include <cstdint>
#include <string>

namespace prmkit {

// FNV-1a, 64-bit. Used to fingerprint artifacts in the run manifest; this
// is an integrity check for determinism audits, not a cryptographic hash.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline std::string digest_hex(const std::string& bytes) { return hex64(fnv1a64(bytes)); }

}  // namespace prmkit
