#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>

namespace seqmargin {

// FNV-1a, 64 bit. Used for vocabulary hashes, model fingerprints and the
// content hashes in the corpus manifest.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001B3ULL;
    }
  }
  void str(std::string_view s) noexcept {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void u64(std::uint64_t v) noexcept {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) noexcept { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) noexcept {
    for (double v : vs) f64(v);
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

}  // namespace seqmargin
