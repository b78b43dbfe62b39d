#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "privswarm/errors.hpp"
#include "privswarm/protocols.hpp"
#include "privswarm/session.hpp"
#include "privswarm/triples.hpp"
#include "test_util.hpp"

namespace privswarm {
namespace {

using testing::deal;
using testing::deal_real;
using testing::open;
using testing::open_real;
using testing::Views;

SharedTensor do_mul(Party& p, const SharedTensor& a, const SharedTensor& b) {
  return mul(p, a, b);
}

class MulBackends : public ::testing::TestWithParam<MulBackend> {
 protected:
  Session make(std::uint64_t seed, std::size_t triples = 200000) {
    SessionConfig c = testing::seeded(seed);
    c.mul_backend = GetParam();
    c.triples = triples;
    return establish_session(c);
  }
};

TEST_P(MulBackends, IntegerExample) {
  auto s = make(1);
  std::mt19937_64 rng(1);
  const auto z = testing::run_binary(s, deal({2}, {1}, 0, rng), deal({3}, {1}, 0, rng),
                                     do_mul);
  EXPECT_EQ(open(z)[0], 6u);
}

TEST_P(MulBackends, FixedPointExample) {
  auto s = make(2);
  FixedPoint fp(16);
  std::mt19937_64 rng(2);
  const auto z = testing::run_binary(
      s, deal_real({1.5, 0.0}, {2}, fp, rng), deal_real({2.0, -7.25}, {2}, fp, rng),
      mul_trunc);
  const auto v = open(z);
  EXPECT_LE(std::abs(to_signed(v[0] - fp.encode(3.0))), 1);
  EXPECT_LE(std::abs(to_signed(v[1])), 1);
}

TEST_P(MulBackends, ZeroAnnihilates) {
  auto s = make(3);
  std::mt19937_64 rng(3);
  const auto z = testing::run_binary(s, deal({0}, {1}, 16, rng),
                                     deal({rng()}, {1}, 16, rng), do_mul);
  EXPECT_EQ(open(z)[0], 0u);
}

TEST_P(MulBackends, MatchesRingProductExactly) {
  auto s = make(4);
  std::mt19937_64 rng(4);
  const std::size_t n = 100000;
  std::vector<Ring> x(n), y(n);
  for (auto& v : x) v = rng();
  for (auto& v : y) v = rng();
  const auto z = testing::run_binary(s, deal(x, {n}, 0, rng), deal(y, {n}, 0, rng),
                                     do_mul);
  const auto v = open(z);
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(v[i], x[i] * y[i]) << i;
  EXPECT_EQ(s.stats().total_rounds(), 1u);
}

INSTANTIATE_TEST_SUITE_P(Backends, MulBackends,
                         ::testing::Values(MulBackend::replicated, MulBackend::triples));

TEST(Mul, TripleBackendAccounting) {
  SessionConfig c = testing::seeded(5);
  c.mul_backend = MulBackend::triples;
  c.triples = 10;
  auto s = establish_session(c);
  std::mt19937_64 rng(5);
  const auto x = deal({1, 2, 3, 4}, {4}, 0, rng);
  testing::run_binary(s, x, x, do_mul);
  EXPECT_EQ(s.party(PartyId::p1).triples()->consumed(), 4u);
  EXPECT_EQ(s.stats().total_bytes(), 3u * (8 * 8 + 16));
  EXPECT_EQ(s.stats().total_rounds(), 1u);
  // Seven more would overrun the store.
  const auto big = deal({1, 2, 3, 4, 5, 6, 7}, {7}, 0, rng);
  EXPECT_THROW(testing::run_binary(s, big, big, do_mul), CapacityError);
}

TEST(Mul, ShapeMismatch) {
  auto s = establish_session(testing::seeded(6));
  std::mt19937_64 rng(6);
  EXPECT_THROW(testing::run_binary(s, deal({1, 2}, {2}, 0, rng),
                                   deal({1, 2, 3}, {3}, 0, rng), do_mul),
               ShapeError);
}

TEST(Matmul, SharedTimesShared) {
  auto s = establish_session(testing::seeded(7));
  std::mt19937_64 rng(7);
  const std::size_t m = 3, k = 5, n = 4;
  std::vector<Ring> a(m * k), b(k * n);
  for (auto& v : a) v = rng();
  for (auto& v : b) v = rng();
  const auto z = testing::run_binary(s, deal(a, {m, k}, 0, rng), deal(b, {k, n}, 0, rng),
                                     [](Party& p, const SharedTensor& x,
                                        const SharedTensor& y) { return matmul(p, x, y); });
  const auto v = open(z);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Ring acc = 0;
      for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * n + j];
      EXPECT_EQ(v[i * n + j], acc);
    }
  }
  EXPECT_EQ(s.stats().total_rounds(), 1u);
  EXPECT_EQ(s.stats().total_bytes(), 3u * (m * n * 8 + 16));
}

TEST(Trunc, ExactMultiplesAndZero) {
  auto s = establish_session(testing::seeded(8));
  FixedPoint fp(16);
  std::mt19937_64 rng(8);
  const Ring five = fp.encode(5.0) << 16;
  const auto z = testing::run_unary(s, deal({five, 0, Ring{0} - five}, {3}, 32, rng),
                                    [](Party& p, const SharedTensor& x) {
                                      return trunc(p, x);
                                    });
  const auto v = open(z);
  EXPECT_EQ(z[0].scale, 16);
  EXPECT_EQ(v[0], fp.encode(5.0));
  EXPECT_EQ(v[1], 0u);
  EXPECT_EQ(v[2], fp.encode(-5.0));
}

TEST(Trunc, StatisticalHarness) {
  auto s = establish_session(testing::seeded(9));
  std::mt19937_64 rng(9);
  const std::size_t n = 100000;
  // |x| < 2^(62 - 2f) at f = 16 before scaling: products well inside headroom.
  std::uniform_int_distribution<std::int64_t> dist(-(std::int64_t{1} << 45),
                                                   std::int64_t{1} << 45);
  std::vector<Ring> x(n);
  for (auto& v : x) v = to_ring(dist(rng));
  const auto z = testing::run_unary(s, deal(x, {n}, 32, rng),
                                    [](Party& p, const SharedTensor& a) {
                                      return trunc(p, a);
                                    });
  const auto v = open(z);
  std::int64_t worst = 0;
  int wraps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t e = to_signed(v[i] - arith_shift(x[i], 16));
    if (e < 0 || e > 1) ++wraps;
    worst = std::max(worst, std::abs(e));
  }
  EXPECT_EQ(wraps, 0);
  EXPECT_LE(worst, 1);
  EXPECT_EQ(s.stats().total_rounds(), 1u);
  EXPECT_EQ(s.stats().total_messages(), 1u);
}

SharedTensor do_less(Party& p, const SharedTensor& a, const SharedTensor& b) {
  return less_than(p, a, b);
}

TEST(LessThan, Examples) {
  auto s = establish_session(testing::seeded(10));
  FixedPoint fp(16);
  std::mt19937_64 rng(10);
  const auto z = testing::run_binary(s, deal_real({3, -1, 5, 0}, {4}, fp, rng),
                                     deal_real({5, 0, 3, 0}, {4}, fp, rng), do_less);
  EXPECT_EQ(open(z), (std::vector<Ring>{1, 1, 0, 0}));
  EXPECT_EQ(z[0].scale, 0);
}

class CarryModes : public ::testing::TestWithParam<CarryMode> {};

TEST_P(CarryModes, ExhaustiveSixteenBitGrid) {
  SessionConfig c = testing::seeded(11, 8);
  c.carry_mode = GetParam();
  auto s = establish_session(c);
  FixedPoint fp(8);
  std::mt19937_64 rng(11);
  std::vector<double> x, y;
  for (int a = -128; a < 128; ++a) {
    for (int b = -128; b < 128; ++b) {
      x.push_back(a);
      y.push_back(b);
    }
  }
  const auto z = testing::run_binary(s, deal_real(x, {x.size()}, fp, rng),
                                     deal_real(y, {y.size()}, fp, rng), do_less);
  const auto v = open(z);
  int failures = 0;
  for (std::size_t i = 0; i < v.size(); ++i) failures += v[i] != Ring(x[i] < y[i]);
  EXPECT_EQ(failures, 0);
  const auto rounds = s.stats().total_rounds();
  if (GetParam() == CarryMode::ripple) {
    EXPECT_EQ(rounds, 65u);
  } else {
    EXPECT_EQ(rounds, 10u);
  }
}

TEST_P(CarryModes, RandomWidePairs) {
  SessionConfig c = testing::seeded(12);
  c.carry_mode = GetParam();
  auto s = establish_session(c);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::int64_t> dist(-(std::int64_t{1} << 61),
                                                   (std::int64_t{1} << 61) - 1);
  const std::size_t n = 100000;
  std::vector<Ring> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = to_ring(dist(rng));
    y[i] = i % 97 == 0 ? x[i] : to_ring(dist(rng));
  }
  const auto v = open(testing::run_binary(s, deal(x, {n}, 16, rng),
                                          deal(y, {n}, 16, rng), do_less));
  for (std::size_t i = 0; i < n; ++i) {
    ASSERT_EQ(v[i], Ring(to_signed(x[i]) < to_signed(y[i]))) << i;
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, CarryModes,
                         ::testing::Values(CarryMode::ripple, CarryMode::parallel_prefix));

TEST(Binary, AndGateAndReveal) {
  auto s = establish_session(testing::seeded(13));
  std::mt19937_64 rng(13);
  std::vector<std::uint64_t> a(8), b(8);
  for (auto& v : a) v = rng();
  for (auto& v : b) v = rng();
  auto split = [&](const std::vector<std::uint64_t>& v) {
    std::array<BinaryShare, 3> out;
    std::vector<std::uint64_t> r1(v.size()), r2(v.size()), r3(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      r1[i] = rng();
      r2[i] = rng();
      r3[i] = v[i] ^ r1[i] ^ r2[i];
    }
    out[0] = {PartyId::p1, r1, r2};
    out[1] = {PartyId::p2, r2, r3};
    out[2] = {PartyId::p3, r3, r1};
    return out;
  };
  const auto as = split(a), bs = split(b);
  const auto got = s.run([&](Party& p) {
    const int i = index_of(p.id());
    return reveal_bits(p, band(p, as[i], bs[i]));
  });
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(got[0][i], a[i] & b[i]);
    EXPECT_EQ(got[2][i], a[i] & b[i]);
  }
}

TEST(Select, Examples) {
  auto s = establish_session(testing::seeded(14));
  FixedPoint fp(16);
  std::mt19937_64 rng(14);
  const auto b = deal({1, 0}, {2}, 0, rng);
  const auto x = deal_real({2.5, 2.5}, {2}, fp, rng);
  const auto y = deal_real({-4.0, -4.0}, {2}, fp, rng);
  const auto z = s.run([&](Party& p) {
    const int i = index_of(p.id());
    return select(p, b[i], x[i], y[i]);
  });
  EXPECT_EQ(open_real(z), (std::vector<double>{2.5, -4.0}));
}

TEST(Select, RandomMuxIdempotentAndLinear) {
  auto s = establish_session(testing::seeded(15));
  std::mt19937_64 rng(15);
  const std::size_t n = 1000;
  std::vector<Ring> b(n), x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = rng() & 1u;
    x[i] = rng();
    y[i] = rng();
  }
  const auto bs = deal(b, {n}, 0, rng), xs = deal(x, {n}, 16, rng),
             ys = deal(y, {n}, 16, rng);
  const auto z = s.run([&](Party& p) {
    const int i = index_of(p.id());
    const SharedTensor once = select(p, bs[i], xs[i], ys[i]);
    const SharedTensor twice = select(p, bs[i], once, ys[i]);
    const SharedTensor sum = select(p, bs[i], add(xs[i], ys[i]), add(ys[i], ys[i]));
    return std::array<SharedTensor, 3>{once, twice, sum};
  });
  const Views once{z[0][0], z[1][0], z[2][0]};
  const Views twice{z[0][1], z[1][1], z[2][1]};
  const Views sum{z[0][2], z[1][2], z[2][2]};
  const auto o = open(once), t = open(twice), l = open(sum);
  for (std::size_t i = 0; i < n; ++i) {
    const Ring want = b[i] ? x[i] : y[i];
    ASSERT_EQ(o[i], want);
    ASSERT_EQ(t[i], want);
    ASSERT_EQ(l[i], want + y[i]);
  }
}

TEST(Max, Examples) {
  auto s = establish_session(testing::seeded(16));
  FixedPoint fp(16);
  std::mt19937_64 rng(16);
  auto max_of = [&](std::vector<double> v) {
    const auto z = testing::run_unary(s, deal_real(v, {1, v.size()}, fp, rng),
                                      [](Party& p, const SharedTensor& a) {
                                        return max_last(p, a);
                                      });
    return open_real(z)[0];
  };
  EXPECT_EQ(max_of({1, 5, 3}), 5.0);
  EXPECT_EQ(max_of({2.25, 2.25, 2.25}), 2.25);
  EXPECT_EQ(max_of({-2, -7}), -2.0);
  EXPECT_EQ(max_of({-9}), -9.0);
}

TEST(Max, RandomRowsAndRoundCount) {
  SessionConfig c = testing::seeded(17);
  c.carry_mode = CarryMode::parallel_prefix;
  auto s = establish_session(c);
  FixedPoint fp(16);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-50, 50);
  const std::size_t rows = 20, n = 11;
  std::vector<double> v(rows * n);
  for (auto& e : v) e = fp.decode(fp.encode(dist(rng)));
  const auto z = testing::run_unary(s, deal_real(v, {rows, n}, fp, rng),
                                    [](Party& p, const SharedTensor& a) {
                                      return max_last(p, a);
                                    });
  const auto got = open_real(z);
  for (std::size_t r = 0; r < rows; ++r) {
    EXPECT_EQ(got[r], *std::max_element(v.begin() + r * n, v.begin() + (r + 1) * n));
  }
  // ceil(log2 11) = 4 levels of comparison + select.
  EXPECT_EQ(s.stats().total_rounds(), 4u * (10 + 1));
}

TEST(Max, EmptyAxis) {
  auto s = establish_session(testing::seeded(18));
  std::mt19937_64 rng(18);
  EXPECT_THROW(testing::run_unary(s, deal({}, {2, 0}, 16, rng),
                                  [](Party& p, const SharedTensor& a) {
                                    return max_last(p, a);
                                  }),
               ShapeError);
}

TEST(Argmax, OneHotOfFirstMaximum) {
  auto s = establish_session(testing::seeded(19));
  FixedPoint fp(16);
  std::mt19937_64 rng(19);
  const std::vector<double> v = {0.5, 3, -1, 3, 2, 1, -4,
                                 7, 0, 0, 0, 0, 0, 6.5};
  const auto z = testing::run_unary(s, deal_real(v, {2, 7}, fp, rng),
                                    [](Party& p, const SharedTensor& a) {
                                      return argmax_onehot(p, a);
                                    });
  EXPECT_EQ(open(z), (std::vector<Ring>{0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0}));
  EXPECT_EQ(z[0].shape, (Shape{2, 7}));
}

TEST(Reveal, ToOneParty) {
  auto s = establish_session(testing::seeded(20));
  std::mt19937_64 rng(20);
  const auto x = deal({5, 6}, {2}, 0, rng);
  const auto got = s.run([&](Party& p) {
    return reveal_to(p, x[index_of(p.id())], PartyId::p2);
  });
  EXPECT_FALSE(got[0].has_value());
  ASSERT_TRUE(got[1].has_value());
  EXPECT_EQ(*got[1], (std::vector<Ring>{5, 6}));
  EXPECT_FALSE(got[2].has_value());
  EXPECT_EQ(s.stats().total_messages(), 1u);
}

TEST(ShareInput, EachOwner) {
  FixedPoint fp(16);
  for (PartyId owner : kAllParties) {
    auto s = establish_session(testing::seeded(21 + index_of(owner)));
    const PublicTensor value({3}, fp.encode(std::vector<double>{1.5, -2, 1e3}), 16);
    const auto z = s.run([&](Party& p) {
      return share_input(p, owner,
                         p.id() == owner ? std::optional(value) : std::nullopt,
                         {3}, 16);
    });
    EXPECT_EQ(open(z), value.data);
    EXPECT_EQ(s.stats().total_messages(), 2u);
    EXPECT_EQ(s.stats().phase_bytes(Phase::share_input), 2u * (3 * 8 + 16));
  }
}

// Plaintext mirror of the secure exp schedule in double precision.
double exp_limit(double x) {
  double y = 1 + x / 256;
  for (int i = 0; i < 8; ++i) y *= y;
  return y;
}

struct ElementaryCase {
  ElementaryKind kind;
  double lo, hi;
  bool log_grid;
};

std::vector<double> grid(const ElementaryCase& c, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) {
    const double t = i / double(n - 1);
    g.push_back(c.log_grid ? c.lo * std::pow(c.hi / c.lo, t) : c.lo + (c.hi - c.lo) * t);
  }
  return g;
}

std::vector<double> run_elementary(ElementaryKind kind, const std::vector<double>& x,
                                   std::uint64_t seed) {
  auto s = establish_session(testing::seeded(seed));
  FixedPoint fp(16);
  std::mt19937_64 rng(seed);
  return open_real(testing::run_unary(s, deal_real(x, {x.size()}, fp, rng),
                                      [&](Party& p, const SharedTensor& a) {
                                        return elementary_approx(p, kind, a);
                                      }));
}

TEST(Elementary, Examples) {
  const auto e = run_elementary(ElementaryKind::exp, {0.0, 1.0}, 30);
  EXPECT_NEAR(e[0], 1.0, std::ldexp(1.0, -10));
  EXPECT_NEAR(e[1], 2.71828, 0.01);
  const auto r = run_elementary(ElementaryKind::reciprocal, {2.0, 3.0}, 31);
  EXPECT_NEAR(r[0], 0.5, std::ldexp(1.0, -10));
  EXPECT_NEAR(r[1], 1.0 / 3.0, std::ldexp(1.0, -10));
  const auto q = run_elementary(ElementaryKind::rsqrt, {4.0}, 32);
  EXPECT_NEAR(q[0], 0.5, std::ldexp(1.0, -10));
}

TEST(Elementary, GridWithinRelativeBound) {
  // Reciprocal stops at 500: beyond roughly 2/0.003 the seed exceeds 2/x
  // and Newton diverges, and the exp inside the seed overflows past 512.
  const ElementaryCase cases[] = {
      {ElementaryKind::exp, -16, 4, false},
      {ElementaryKind::reciprocal, 1.0 / 16, 500, true},
      {ElementaryKind::rsqrt, 1.0 / 16, 256, true},
  };
  for (const auto& c : cases) {
    const auto x = grid(c, 1000);
    const auto y = run_elementary(c.kind, x, 33);
    // Relative 2^-10, with a two-ulp floor for outputs near the resolution.
    const double ulp = std::ldexp(1.0, -16);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double want = c.kind == ElementaryKind::exp          ? exp_limit(x[i])
                          : c.kind == ElementaryKind::reciprocal ? 1 / x[i]
                                                                 : 1 / std::sqrt(x[i]);
      ASSERT_LE(std::abs(y[i] - want), std::ldexp(want, -10) + 2 * ulp)
          << "kind " << int(c.kind) << " x=" << x[i];
    }
  }
}

}  // namespace
}  // namespace privswarm
