#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>

#include "privswarm/sharing.hpp"

namespace privswarm {

// One party's shares of a multiplication triple (a, b, c = a*b).
struct TripleShare {
  ReplicatedShare a, b, c;
};

// Precomputed triples for one party. Each triple is handed out once.
class TripleStore {
 public:
  void push(const TripleShare& t) { triples_.push_back(t); }
  // Throws CapacityError when fewer than n triples remain.
  std::vector<TripleShare> take(std::size_t n);

  std::size_t remaining() const noexcept { return triples_.size(); }
  std::uint64_t consumed() const noexcept { return consumed_; }

 private:
  std::deque<TripleShare> triples_;
  std::uint64_t consumed_ = 0;
};

// Trusted local dealer for tests and benchmarks.
std::array<std::unique_ptr<TripleStore>, 3> deal_triples(std::size_t n,
                                                         std::uint64_t seed);

}  // namespace privswarm
