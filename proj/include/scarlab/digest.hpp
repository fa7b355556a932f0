#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <type_traits>

namespace scarlab {

/// Incremental 64-bit FNV-1a hash. Used for operator, trajectory and output
/// file digests; not a cryptographic hash.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  Fnv1a& value(const T& v) {
    return bytes(&v, sizeof(T));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  Fnv1a& values(std::span<const T> v) {
    return bytes(v.data(), v.size_bytes());
  }

  Fnv1a& text(std::string_view s) { return bytes(s.data(), s.size()); }

  std::uint64_t get() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace scarlab
