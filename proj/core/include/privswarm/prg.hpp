#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "privswarm/fixed_point.hpp"

namespace privswarm {

// ChaCha20 keystream generator keyed by (seed, stream). Two parties holding
// the same seed and stream draw identical sequences.
class Prg {
 public:
  Prg() : Prg(0, 0) {}
  Prg(std::uint64_t seed, std::uint64_t stream);

  Ring next();
  void fill(std::span<Ring> out);
  std::vector<Ring> draw(std::size_t n);

 private:
  void refill();

  std::array<unsigned char, 32> key_{};
  std::array<unsigned char, 12> nonce_{};
  std::uint32_t block_ = 0;
  std::array<Ring, 64> buffer_{};
  std::size_t pos_ = 64;
};

// SplitMix64 step; used to expand a master seed into per-purpose seeds.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Fresh seed from the operating system.
std::uint64_t random_seed();

}  // namespace privswarm
