#pragma once

#include <array>
#include <random>
#include <utility>
#include <vector>

#include "privswarm/session.hpp"
#include "privswarm/sharing.hpp"

namespace privswarm::testing {

using Views = std::array<SharedTensor, 3>;

inline SessionConfig seeded(std::uint64_t seed, int frac_bits = 16) {
  SessionConfig c;
  c.seed = seed;
  c.fixed_point = FixedPoint(frac_bits);
  return c;
}

// Dealer-side sharing used to feed protocols directly in tests.
inline Views deal(const std::vector<Ring>& values, const Shape& shape, int scale,
                  std::mt19937_64& rng) {
  Views v;
  for (PartyId p : kAllParties) v[index_of(p)] = SharedTensor(p, shape, scale);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto s = share(values[i], rng(), rng());
    for (int p = 0; p < 3; ++p) v[p].set(i, s[p]);
  }
  return v;
}

inline Views deal_real(const std::vector<double>& values, const Shape& shape,
                       const FixedPoint& fp, std::mt19937_64& rng) {
  return deal(fp.encode(values), shape, fp.frac_bits(), rng);
}

// Reconstructs from P1+P2 and cross-checks against P3.
inline std::vector<Ring> open(const Views& v) {
  auto a = reconstruct(v[0], v[1]);
  auto b = reconstruct(v[1], v[2]);
  if (a != b) throw ShareCorruptionError("views disagree");
  return a;
}

inline std::vector<double> open_real(const Views& v) {
  std::vector<double> out;
  for (Ring r : open(v)) out.push_back(decode_at_scale(r, v[0].scale));
  return out;
}

template <class F>
Views run_unary(Session& s, const Views& x, F&& fn) {
  return s.run([&](Party& p) { return fn(p, x[index_of(p.id())]); });
}

template <class F>
Views run_binary(Session& s, const Views& x, const Views& y, F&& fn) {
  return s.run([&](Party& p) {
    const int i = index_of(p.id());
    return fn(p, x[i], y[i]);
  });
}

}  // namespace privswarm::testing
