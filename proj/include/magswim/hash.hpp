#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace magswim {

/// 64-bit FNV-1a digest rendered as 16 hex digits.
inline std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xfU];
    h >>= 4;
  }
  return out;
}

/// Round-trip decimal text (17 significant digits).
inline std::string format17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace magswim
