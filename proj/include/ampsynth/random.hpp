#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so results never depend on iteration order or on how work
// is split across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace ampsynth::random {

using Philox4x32Block = std::array<std::uint32_t, 4>;

/// Philox4x32-10 block function (Salmon et al., Random123).
constexpr Philox4x32Block philox4x32(Philox4x32Block ctr, std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// FNV-1a over bytes.
constexpr std::uint64_t hash_bytes(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Two 64-bit words addressed by (key, stream, index).
constexpr std::array<std::uint64_t, 2> words(std::uint64_t key, std::uint64_t stream,
                                             std::uint64_t index) noexcept {
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)});
  return {(std::uint64_t{out[1]} << 32) | out[0], (std::uint64_t{out[3]} << 32) | out[2]};
}

/// Uniform double in (0, 1] with 53 random bits.
constexpr double to_unit_open_closed(std::uint64_t w) noexcept {
  return static_cast<double>((w >> 11) + 1) * 0x1.0p-53;
}

/// Standard normal addressed by (key, stream, index), via Box-Muller.
inline double normal(std::uint64_t key, std::uint64_t stream, std::uint64_t index) noexcept {
  const auto [w0, w1] = words(key, stream, index);
  const double radius = std::sqrt(-2.0 * std::log(to_unit_open_closed(w0)));
  return radius * std::cos(2.0 * std::numbers::pi * to_unit_open_closed(w1));
}

/// Sequential 64-bit stream over consecutive Philox counters.
class Stream {
public:
  constexpr Stream(std::uint64_t key, std::uint64_t stream) noexcept : key_(key), stream_(stream) {}

  constexpr std::uint64_t next() noexcept {
    if (avail_ == 0) {
      buf_ = words(key_, stream_, counter_++);
      avail_ = 2;
    }
    return buf_[--avail_];
  }

  /// Unbiased integer in [0, bound]; Lemire's multiply-shift with rejection.
  constexpr std::uint64_t uniform_inclusive(std::uint64_t bound) noexcept {
    if (bound == UINT64_MAX) return next();
    const std::uint64_t range = bound + 1;
    const std::uint64_t threshold = (0 - range) % range;
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>(next()) * range;
      if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
  }

private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int avail_ = 0;
};

}  // namespace ampsynth::random
