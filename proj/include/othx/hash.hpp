#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace othx {

// FNV-1a 64. Content identity for artifact provenance (not cryptographic).
struct Fnv1a {
  uint64_t state = 0xcbf29ce484222325ull;

  void update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 0x100000001b3ull;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  template <typename T>
  void update_pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    update(&v, sizeof(v));
  }
  uint64_t value() const { return state; }
};

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

// Short id used in artifact filenames.
inline std::string short_hex(uint64_t v) { return hex64(v).substr(0, 8); }

}  // namespace othx
