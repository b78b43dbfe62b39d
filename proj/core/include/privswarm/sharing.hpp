#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "privswarm/fixed_point.hpp"
#include "privswarm/tensor.hpp"

namespace privswarm {

// P1, P2, P3. Party i holds summands (s_i, s_{i+1}) with indices mod 3.
enum class PartyId : std::uint8_t { p1 = 0, p2 = 1, p3 = 2 };

constexpr int index_of(PartyId p) noexcept { return static_cast<int>(p); }
constexpr PartyId party_at(int i) noexcept {
  return static_cast<PartyId>(((i % 3) + 3) % 3);
}
constexpr PartyId next_party(PartyId p) noexcept {
  return party_at(index_of(p) + 1);
}
constexpr PartyId prev_party(PartyId p) noexcept {
  return party_at(index_of(p) + 2);
}
constexpr std::array<PartyId, 3> kAllParties{PartyId::p1, PartyId::p2,
                                             PartyId::p3};

// One party's pair of summands.
struct ReplicatedShare {
  Ring first = 0;   // s_i
  Ring second = 0;  // s_{i+1}

  friend bool operator==(const ReplicatedShare&,
                         const ReplicatedShare&) = default;
};

// Splits `secret` into summands (r1, r2, secret - r1 - r2) and hands each
// party its pair. Result is indexed by party.
std::array<ReplicatedShare, 3> share(Ring secret, Ring r1, Ring r2) noexcept;

// Recombines two distinct parties' pairs, checking the summand they overlap
// on. Throws ShareCorruptionError on mismatch.
Ring reconstruct(PartyId a, const ReplicatedShare& sa, PartyId b,
                 const ReplicatedShare& sb);

// One party's view of a secret-shared tensor (struct-of-arrays over the two
// summands it holds).
struct SharedTensor {
  PartyId party = PartyId::p1;
  Shape shape;
  std::vector<Ring> first;
  std::vector<Ring> second;
  // Fractional bits currently carried: 0 for secret bits, f, or 2f.
  int scale = 0;

  SharedTensor() = default;
  SharedTensor(PartyId p, Shape s, int sc);

  static SharedTensor zeros(PartyId p, Shape s, int scale);
  // Sharing of a public tensor: the value occupies summand 0.
  static SharedTensor from_public(PartyId p, const PublicTensor& value);

  std::size_t size() const noexcept { return first.size(); }
  ReplicatedShare at(std::size_t i) const { return {first[i], second[i]}; }
  void set(std::size_t i, ReplicatedShare s) {
    first[i] = s.first;
    second[i] = s.second;
  }
};

// Element-wise reconstruction of two parties' views of one tensor.
std::vector<Ring> reconstruct(const SharedTensor& a, const SharedTensor& b);

// Communication-free operations. Public operands broadcast per
// check_broadcast.
SharedTensor add(const SharedTensor& a, const SharedTensor& b);
SharedTensor sub(const SharedTensor& a, const SharedTensor& b);
SharedTensor neg(const SharedTensor& a);
SharedTensor add_public(const SharedTensor& a, const PublicTensor& b);
// Result scale is a.scale + b.scale; callers truncate.
SharedTensor mul_public(const SharedTensor& a, const PublicTensor& b);
// Multiplication by a plain integer keeps the scale.
SharedTensor mul_integer(const SharedTensor& a, std::int64_t k);

enum class LinearOp { add_shared, add_public, mul_public };

// Dispatch wrapper over the three local linear operations.
SharedTensor local_linear(LinearOp op, const SharedTensor& a,
                          const SharedTensor& b);
SharedTensor local_linear(LinearOp op, const SharedTensor& a,
                          const PublicTensor& b);

// Slicing helpers used by the kernels; all local.
SharedTensor reshape(SharedTensor a, Shape shape);
// Rows [begin, end) of a tensor viewed as [rows x last_dim].
SharedTensor slice_rows(const SharedTensor& a, std::size_t begin,
                        std::size_t end);
SharedTensor concat_rows(const SharedTensor& a, const SharedTensor& b);
// Concatenates tensors of one scale into a single flat tensor.
SharedTensor concat_flat(std::span<const SharedTensor> parts);
// Splits a flat tensor into consecutive pieces of the given sizes.
std::vector<SharedTensor> split_flat(const SharedTensor& a,
                                     std::span<const std::size_t> sizes);
SharedTensor transpose(const SharedTensor& a);  // 2-D only
// Sum over the last dimension; shape drops it (or becomes [rows, 1]).
SharedTensor row_sum(const SharedTensor& a);
// Broadcasts a per-row value [rows] or [rows,1] across `cols` columns.
SharedTensor repeat_cols(const SharedTensor& a, std::size_t cols);

}  // namespace privswarm
