#pragma once

#include <optional>
#include <span>
#include <vector>

#include "privswarm/party.hpp"
#include "privswarm/sharing.hpp"
#include "privswarm/tensor.hpp"

namespace privswarm {

// XOR-replicated bit words: party i holds words (w_i, w_{i+1}) and the three
// distinct words XOR to the plaintext.
struct BinaryShare {
  PartyId party = PartyId::p1;
  std::vector<std::uint64_t> first;
  std::vector<std::uint64_t> second;

  std::size_t size() const noexcept { return first.size(); }
};

// --- input / output ---------------------------------------------------------

// `owner` secret-shares `value`; the other parties pass std::nullopt and the
// shape/scale the owner will use.
SharedTensor share_input(Party& party, PartyId owner,
                         const std::optional<PublicTensor>& value,
                         const Shape& shape, int scale);

// Opens a tensor to all three parties (one round).
std::vector<Ring> reveal(Party& party, const SharedTensor& x);
// Opens a tensor to `target` only; the others get std::nullopt.
std::optional<std::vector<Ring>> reveal_to(Party& party, const SharedTensor& x,
                                           PartyId target);

// --- arithmetic -------------------------------------------------------------

// Element-wise product at scale x.scale + y.scale, one round.
SharedTensor mul(Party& party, const SharedTensor& x, const SharedTensor& y);

// [m x k] * [k x n] of two shared matrices (one round, native protocol even
// under the triple backend).
SharedTensor matmul(Party& party, const SharedTensor& a, const SharedTensor& b);
// Several independent products resolved in one round.
std::vector<SharedTensor> matmul_batch(Party& party,
                                       std::span<const SharedTensor> a,
                                       std::span<const SharedTensor> b);
// Shared [.., k] times public [k x n]; local.
SharedTensor matmul_public(const SharedTensor& a, const PublicTensor& w);

// Divides by 2^bits, lowering the scale by `bits`. One round in which P1
// sends one value per element to P3. Result is floor(x / 2^bits) + e with e
// in {0, 1}, exact when x is a multiple of 2^bits.
SharedTensor trunc(Party& party, const SharedTensor& x, int bits);
// Truncates by the session's fractional bits.
SharedTensor trunc(Party& party, const SharedTensor& x);
// mul followed by trunc back to scale f.
SharedTensor mul_trunc(Party& party, const SharedTensor& x,
                       const SharedTensor& y);

// --- binary -----------------------------------------------------------------

BinaryShare bxor(const BinaryShare& a, const BinaryShare& b);
// One round.
BinaryShare band(Party& party, const BinaryShare& a, const BinaryShare& b);
std::vector<std::uint64_t> reveal_bits(Party& party, const BinaryShare& x);

// --- comparison and selection -----------------------------------------------

// Secret bits (scale 0) of the sign of each element.
SharedTensor msb(Party& party, const SharedTensor& x);
// 1 where signed(x) < signed(y). Requires |x - y| < 2^62.
SharedTensor less_than(Party& party, const SharedTensor& x,
                       const SharedTensor& y);
SharedTensor less_than_public(Party& party, const SharedTensor& x,
                              const PublicTensor& c);
// b*x + (1-b)*y for secret bits b at scale 0; one multiplication.
SharedTensor select(Party& party, const SharedTensor& b, const SharedTensor& x,
                    const SharedTensor& y);

// Maximum along the last dimension; result shape [rows, 1].
SharedTensor max_last(Party& party, const SharedTensor& x);
// One-hot (scale 0) of the first maximal element along the last dimension.
SharedTensor argmax_onehot(Party& party, const SharedTensor& x);

// --- elementary functions (input and output at scale f) ---------------------

// (1 + x/256)^256; accurate for x in [-16, 4].
SharedTensor exp_approx(Party& party, const SharedTensor& x);
// Newton iteration for 1/x, 12 steps from y0 = 3 exp(1/2 - x) + 0.003.
// Converges for x in [2^-4, ~500].
SharedTensor reciprocal_approx(Party& party, const SharedTensor& x);
// Newton iteration for 1/sqrt(x), 10 steps from
// y0 = 2.2 exp(-(x/2 + 0.2)) + 0.2 - x/2048. Converges for x in [2^-4, 2^8].
SharedTensor rsqrt_approx(Party& party, const SharedTensor& x);

enum class ElementaryKind { exp, reciprocal, rsqrt };
SharedTensor elementary_approx(Party& party, ElementaryKind kind,
                               const SharedTensor& x);

// Seed constants shared with the plaintext references.
namespace approx_constants {
inline constexpr int kExpSquarings = 8;
inline constexpr int kReciprocalIterations = 12;
inline constexpr double kReciprocalSeedScale = 3.0;
inline constexpr double kReciprocalSeedShift = 0.5;
inline constexpr double kReciprocalSeedBias = 0.003;
inline constexpr int kRsqrtIterations = 10;
inline constexpr double kRsqrtSeedScale = 2.2;
inline constexpr double kRsqrtSeedShift = 0.2;
inline constexpr double kRsqrtSeedBias = 0.2;
inline constexpr double kRsqrtSeedSlope = 1.0 / 2048.0;
}  // namespace approx_constants

}  // namespace privswarm
