#include "privswarm/triples.hpp"

#include <string>

#include "privswarm/errors.hpp"
#include "privswarm/prg.hpp"

namespace privswarm {

std::vector<TripleShare> TripleStore::take(std::size_t n) {
  if (n > triples_.size()) {
    throw CapacityError("triple store exhausted: need " + std::to_string(n) +
                        ", have " + std::to_string(triples_.size()));
  }
  std::vector<TripleShare> out(triples_.begin(),
                               triples_.begin() + static_cast<long>(n));
  triples_.erase(triples_.begin(), triples_.begin() + static_cast<long>(n));
  consumed_ += n;
  return out;
}

std::array<std::unique_ptr<TripleStore>, 3> deal_triples(std::size_t n,
                                                         std::uint64_t seed) {
  std::array<std::unique_ptr<TripleStore>, 3> stores;
  for (auto& s : stores) s = std::make_unique<TripleStore>();
  Prg prg(seed, 0x7413);
  for (std::size_t i = 0; i < n; ++i) {
    const Ring a = prg.next(), b = prg.next();
    const auto sa = share(a, prg.next(), prg.next());
    const auto sb = share(b, prg.next(), prg.next());
    const auto sc = share(a * b, prg.next(), prg.next());
    for (int p = 0; p < 3; ++p) stores[p]->push({sa[p], sb[p], sc[p]});
  }
  return stores;
}

}  // namespace privswarm
