#include "privswarm/prg.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

namespace privswarm {

namespace {

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

}  // namespace

Prg::Prg(std::uint64_t seed, std::uint64_t stream) {
  ensure_sodium();
  unsigned char material[16];
  std::memcpy(material, &seed, 8);
  std::memcpy(material + 8, &stream, 8);
  crypto_generichash(key_.data(), key_.size(), material, sizeof material,
                     nullptr, 0);
}

void Prg::refill() {
  static const std::array<unsigned char, sizeof(Ring) * 64> zeros{};
  auto* out = reinterpret_cast<unsigned char*>(buffer_.data());
  crypto_stream_chacha20_ietf_xor_ic(out, zeros.data(), zeros.size(),
                                     nonce_.data(), block_, key_.data());
  block_ += static_cast<std::uint32_t>(zeros.size() / 64);
  pos_ = 0;
}

Ring Prg::next() {
  if (pos_ == buffer_.size()) refill();
  return buffer_[pos_++];
}

void Prg::fill(std::span<Ring> out) {
  for (Ring& v : out) v = next();
}

std::vector<Ring> Prg::draw(std::size_t n) {
  std::vector<Ring> out(n);
  fill(out);
  return out;
}

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t random_seed() {
  ensure_sodium();
  std::uint64_t s;
  randombytes_buf(&s, sizeof s);
  return s;
}

}  // namespace privswarm
