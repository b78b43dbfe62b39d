#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "privswarm/errors.hpp"
#include "privswarm/fixed_point.hpp"

namespace privswarm {
namespace {

TEST(FixedRing, EncodeExamples) {
  FixedPoint fp(16);
  EXPECT_EQ(fp.encode(1.5), 98304u);
  EXPECT_EQ(fp.encode(0.0), 0u);
  EXPECT_EQ(fp.encode(-0.25), Ring{0} - 16384u);
}

TEST(FixedRing, DecodeExamples) {
  FixedPoint fp(16);
  EXPECT_EQ(fp.decode(98304), 1.5);
  EXPECT_EQ(fp.decode(Ring{0} - 16384u), -0.25);
  EXPECT_EQ(fp.decode(1), 0.0000152587890625);
}

TEST(FixedRing, TiesRoundToEven) {
  FixedPoint fp(8);
  const double half = std::ldexp(1.0, -9);
  EXPECT_EQ(fp.encode(half), 0u);
  EXPECT_EQ(fp.encode(3 * half), 2u);
  EXPECT_EQ(fp.encode(-half), 0u);
  EXPECT_EQ(fp.encode(-3 * half), Ring{0} - 2u);
}

TEST(FixedRing, RangeChecks) {
  FixedPoint fp(16);
  EXPECT_THROW(fp.encode(std::ldexp(1.0, 47)), RangeError);
  EXPECT_THROW(fp.encode(-std::ldexp(1.0, 47) - 1.0), RangeError);
  EXPECT_THROW(fp.encode(NAN), RangeError);
  EXPECT_NO_THROW(fp.encode(std::ldexp(1.0, 46)));
  EXPECT_THROW(FixedPoint(7), RangeError);
  EXPECT_THROW(FixedPoint(33), RangeError);
  EXPECT_DOUBLE_EQ(fp.limit(), std::ldexp(1.0, 47));
  EXPECT_DOUBLE_EQ(fp.ulp(), std::ldexp(1.0, -16));
}

TEST(FixedRing, WrapsAndSignedView) {
  const Ring big = ~Ring{0};
  EXPECT_EQ(big + 1, 0u);
  EXPECT_EQ(to_signed(big), -1);
  EXPECT_EQ(arith_shift(to_ring(-5), 1), to_ring(-3));
  EXPECT_EQ(arith_shift(5, 1), 2u);
}

class FixedRingProperty : public ::testing::TestWithParam<int> {};

TEST_P(FixedRingProperty, RoundTripWithinHalfUlp) {
  FixedPoint fp(GetParam());
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1000.0, 1000.0);
  const double tol = std::ldexp(1.0, -GetParam() - 1);
  for (int i = 0; i < 100000; ++i) {
    const double r = dist(rng);
    ASSERT_LE(std::abs(fp.decode(fp.encode(r)) - r), tol) << r;
  }
}

TEST_P(FixedRingProperty, AdditiveHomomorphism) {
  FixedPoint fp(GetParam());
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> dist(-1000.0, 1000.0);
  const double tol = std::ldexp(1.0, -GetParam());
  for (int i = 0; i < 100000; ++i) {
    const double a = dist(rng), b = dist(rng);
    ASSERT_LE(std::abs(fp.decode(fp.encode(a) + fp.encode(b)) - (a + b)), tol);
  }
}

TEST_P(FixedRingProperty, ProductScaleLaw) {
  const int f = GetParam();
  FixedPoint fp(f);
  std::mt19937_64 rng(13);
  // Keep a*b*2^(2f) inside the ring.
  const double bound = std::min(1000.0, std::ldexp(1.0, (62 - 2 * f) / 2));
  std::uniform_real_distribution<double> dist(-bound, bound);
  const double tol = std::ldexp(1.0, -f + 1);
  for (int i = 0; i < 100000; ++i) {
    const double a = dist(rng), b = dist(rng);
    const Ring p = fp.encode(a) * fp.encode(b);
    const double exact = fp.decode(fp.encode(a)) * fp.decode(fp.encode(b));
    ASSERT_LE(std::abs(fp.decode(arith_shift(p, f)) - exact), tol) << a << " " << b;
    ASSERT_DOUBLE_EQ(decode_at_scale(p, 2 * f),
                     fp.decode(fp.encode(a)) * fp.decode(fp.encode(b)));
  }
}

INSTANTIATE_TEST_SUITE_P(FracBits, FixedRingProperty, ::testing::Values(8, 16, 24));

}  // namespace
}  // namespace privswarm
