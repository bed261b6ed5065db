#pragma once

#include <cstdint>

// Randomness layout. One 64-bit seed per run expands, via the SplitMix64
// sequence, into
//   words 1..4  state of the option stream (xoshiro256++), consumed
//               sequentially, exactly d draws per placement step,
//   word  5     the tie key; tie decisions are a pure function of
//               (tie key, step index) and consume nothing.
// Keeping ties off the sequential stream means two runs sharing a seed see
// identical option sets no matter how many ties either run resolves, and two
// runs sharing a tie key resolve identical-looking ties identically.

namespace uballoc {

// SplitMix64 finalizer applied to one value.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// One step of the SplitMix64 sequence.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  return mix64(state += 0x9E3779B97F4A7C15ull);
}

// xoshiro256++ core. State must never be all zero; seeding via SplitMix64
// guarantees this.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : s_) w = splitmix64(s);
  }

  explicit Xoshiro256pp(const std::uint64_t state[4]) {
    for (int i = 0; i < 4; ++i) s_[i] = state[i];
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl_(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl_(s_[3], 45);
    return result;
  }

  // Uniform draw in [0, n) by multiply-shift. Bias is < n/2^64, far below any
  // statistical resolution reachable here; no rejection keeps consumption at
  // exactly one word per draw.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

 private:
  static std::uint64_t rotl_(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// The two decorrelated randomness sources of one run.
struct RngStreams {
  Xoshiro256pp options;
  std::uint64_t tie_key;

  static RngStreams from_seed(std::uint64_t seed) {
    std::uint64_t s = seed;
    std::uint64_t w[5];
    for (auto& x : w) x = splitmix64(s);
    return RngStreams{Xoshiro256pp(w), w[4]};
  }
};

// Tie decision word for placement step t.
inline std::uint64_t tie_value(std::uint64_t tie_key, std::uint64_t t) {
  return mix64(tie_key ^ (t * 0xD1B54A32D192ED03ull));
}

// Uniform index in [0, k) from one decision word.
inline std::uint64_t pick_index(std::uint64_t word, std::uint64_t k) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(word) * k) >> 64);
}

// Seed for replication `index` of an experiment with base seed `base`.
// Stable: adding replications never re-randomizes earlier ones.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(base ^ ((index + 1) * 0xA24BAED4963EE407ull));
}

}  // namespace uballoc
