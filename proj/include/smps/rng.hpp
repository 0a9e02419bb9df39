#pragma once

// Counter-based random numbers. Draw k of stream s under seed q is a fixed
// function of (q, s, k), so any draw can be regenerated without replaying the
// ones before it.
//
//   key   = mix(q ^ mix(s ^ 0x6a09e667f3bcc909))
//   bits  = mix(key + (k + 1) * 0x9e3779b97f4a7c15)
//   u     = (bits >> 11) * 2^-53                      in [0, 1)
//   gauss = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)        (two draws, cosine branch only)
//
// mix is the splitmix64 finalizer.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace smps {

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0) noexcept
      : seed_(seed), stream_(stream), counter_(counter), key_(mix(seed ^ mix(stream ^ 0x6a09e667f3bcc909ULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() noexcept { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal; consumes two draws.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  /// Number of 64-bit draws consumed so far.
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_;
  std::uint64_t key_;
};

}  // namespace smps
