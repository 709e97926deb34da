#pragma once

// Counter-based random streams (Philox4x32-10).
//
// A stream is identified by (seed, replica, stream). Its output is a pure
// function of that triple and the number of draws made so far, so replicas
// and per-vertex clocks can be generated in any order or on any thread.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <limits>

namespace bslab {

class Philox4x32 {
 public:
  using result_type = std::uint64_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  Philox4x32(std::uint64_t seed, std::uint32_t replica, std::uint32_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        replica_(replica),
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// The raw bijection, exposed for known-answer tests.
  static Block encrypt(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeylA;
        key[1] += kWeylB;
      }
      const std::uint64_t p0 = std::uint64_t{kMulA} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMulB} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

  result_type operator()() {
    if (used_ >= 4) refill();
    const std::uint64_t hi = buffer_[used_];
    const std::uint64_t lo = buffer_[used_ + 1];
    used_ += 2;
    return (hi << 32) | lo;
  }

  /// Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1).
  double uniform_open() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-and-reject.
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t blocks_used() const { return counter_; }

 private:
  void refill() {
    const Block ctr{static_cast<std::uint32_t>(counter_),
                    static_cast<std::uint32_t>(counter_ >> 32), replica_, stream_};
    buffer_ = encrypt(ctr, key_);
    ++counter_;
    used_ = 0;
  }

  Key key_;
  std::uint32_t replica_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  Block buffer_{};
  int used_ = 4;
};

using Rng = Philox4x32;

/// Stream ids at or above this value are reserved for non-vertex purposes.
inline constexpr std::uint32_t kAuxStreamBase = 0xFFFF0000u;

/// Per-vertex clock stream of a replica.
inline Rng vertex_stream(std::uint64_t seed, std::uint32_t replica, std::uint32_t vertex) {
  return Rng(seed, replica, vertex);
}

// Tags of the auxiliary streams used inside the library.
namespace stream_tag {
inline constexpr std::uint32_t generic = 0;
inline constexpr std::uint32_t graph = 1;
inline constexpr std::uint32_t strip = 2;
inline constexpr std::uint32_t discrete = 3;
inline constexpr std::uint32_t classical = 4;
}  // namespace stream_tag

/// Auxiliary stream of a replica (discrete-chain choices, sampling loops, ...).
inline Rng aux_stream(std::uint64_t seed, std::uint32_t replica = 0, std::uint32_t tag = stream_tag::generic) {
  if (tag >= 0x10000u) throw std::invalid_argument("aux_stream: tag must be below 2^16");
  return Rng(seed, replica, kAuxStreamBase + tag);
}

}  // namespace bslab
