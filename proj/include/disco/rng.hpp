#pragma once

// SplitMix64 used as a counter-based generator.
//
//   mix(z)   = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//              z ^= z >> 27; z *= 0x94D049BB133111EB; z ^ (z >> 31)
//   key      = mix(seed + stream * G)            G = 0x9E3779B97F4A7C15
//   draw i   = mix(key + (i + 1) * G)            i = 0, 1, 2, ...
//   uniform  = (draw >> 11) * 2^-53              in [0, 1)
//   normal   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2), two consecutive draws
//   index(n) = floor(uniform * n)
//
// All arithmetic is modulo 2^64, so any language with 64-bit unsigned
// integers reproduces the sequences bit for bit.

#include <cstddef>
#include <cstdint>

namespace disco {

enum class RngStream : std::uint64_t {
  kRewardTable = 1,
  kReferenceLogits = 2,
  kDataset = 3,
  kShuffle = 4,
  kProbe = 5,
};

std::uint64_t splitmix64_mix(std::uint64_t z);

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, RngStream stream);

  std::uint64_t next_u64();
  double uniform();
  double normal();
  std::size_t index(std::size_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace disco
