#include "privswarm/fixed_point.hpp"

#include <cfenv>
#include <cmath>
#include <string>

#include "privswarm/errors.hpp"

namespace privswarm {

FixedPoint::FixedPoint(int frac_bits) : frac_bits_(frac_bits) {
  if (frac_bits < kMinFracBits || frac_bits > kMaxFracBits) {
    throw RangeError("fractional bits must lie in [8, 32], got " +
                     std::to_string(frac_bits));
  }
}

double FixedPoint::ulp() const noexcept { return std::ldexp(1.0, -frac_bits_); }

double FixedPoint::limit() const noexcept {
  return std::ldexp(1.0, 63 - frac_bits_);
}

Ring FixedPoint::encode(double r) const {
  if (!std::isfinite(r) || !(std::fabs(r) < limit())) {
    throw RangeError("value " + std::to_string(r) +
                     " outside fixed-point range");
  }
  // Scaling by a power of two is exact; nearbyint honours the default
  // round-to-nearest-even mode.
  const double scaled = std::nearbyint(std::ldexp(r, frac_bits_));
  if (scaled >= 0x1p63 || scaled < -0x1p63) {
    throw RangeError("value " + std::to_string(r) +
                     " rounds outside fixed-point range");
  }
  return to_ring(static_cast<std::int64_t>(scaled));
}

double FixedPoint::decode(Ring v) const noexcept {
  return decode_at_scale(v, frac_bits_);
}

std::vector<Ring> FixedPoint::encode(std::span<const double> values) const {
  std::vector<Ring> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(encode(v));
  return out;
}

std::vector<double> FixedPoint::decode(std::span<const Ring> values) const {
  std::vector<double> out;
  out.reserve(values.size());
  for (Ring v : values) out.push_back(decode(v));
  return out;
}

double decode_at_scale(Ring v, int frac_bits) noexcept {
  return std::ldexp(static_cast<double>(to_signed(v)), -frac_bits);
}

}  // namespace privswarm
