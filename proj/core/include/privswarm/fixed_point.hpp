#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace privswarm {

// Element of Z_{2^64}. All arithmetic wraps; values >= 2^63 read as negative.
using Ring = std::uint64_t;

constexpr std::int64_t to_signed(Ring v) noexcept {
  return static_cast<std::int64_t>(v);
}
constexpr Ring to_ring(std::int64_t v) noexcept { return static_cast<Ring>(v); }

// Arithmetic (sign-preserving) right shift, i.e. floor(v / 2^bits).
constexpr Ring arith_shift(Ring v, int bits) noexcept {
  return to_ring(to_signed(v) >> bits);
}

// Two's-complement fixed-point codec with `frac_bits` fractional bits.
class FixedPoint {
 public:
  static constexpr int kMinFracBits = 8;
  static constexpr int kMaxFracBits = 32;
  static constexpr int kDefaultFracBits = 16;

  explicit FixedPoint(int frac_bits = kDefaultFracBits);

  int frac_bits() const noexcept { return frac_bits_; }
  // Resolution 2^-f.
  double ulp() const noexcept;
  // Exclusive bound 2^(63-f) on representable magnitudes.
  double limit() const noexcept;

  // round(r * 2^f) mod 2^64, ties to even. Throws RangeError if |r| is not
  // representable.
  Ring encode(double r) const;
  double decode(Ring v) const noexcept;

  std::vector<Ring> encode(std::span<const double> values) const;
  std::vector<double> decode(std::span<const Ring> values) const;

  friend bool operator==(const FixedPoint&, const FixedPoint&) = default;

 private:
  int frac_bits_;
};

// Decodes a value carried at an arbitrary scale (e.g. 2f after a product).
double decode_at_scale(Ring v, int frac_bits) noexcept;

}  // namespace privswarm
