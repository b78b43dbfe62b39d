#include "privswarm/party.hpp"

#include <algorithm>
#include <string>

#include "privswarm/errors.hpp"
#include "privswarm/triples.hpp"

namespace privswarm {

std::string_view party_kind_name(PartyKind k) noexcept {
  switch (k) {
    case PartyKind::uav_node: return "uav_node";
    case PartyKind::operator_station: return "operator_station";
    case PartyKind::computation_server: return "computation_server";
  }
  return "unknown";
}

std::uint64_t CommStats::total_bytes() const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : sent)
    for (const auto& link : row)
      for (const auto& c : link) t += c.bytes;
  return t;
}

std::uint64_t CommStats::total_messages() const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : sent)
    for (const auto& link : row)
      for (const auto& c : link) t += c.messages;
  return t;
}

std::uint64_t CommStats::total_rounds() const noexcept {
  std::uint64_t t = 0;
  for (auto r : rounds) t += r;
  return t;
}

std::uint64_t CommStats::phase_bytes(Phase p) const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : sent)
    for (const auto& link : row) t += link[static_cast<std::size_t>(p)].bytes;
  return t;
}

std::uint64_t CommStats::pair_bytes(PartyId from, PartyId to) const noexcept {
  std::uint64_t t = 0;
  for (const auto& c : sent[index_of(from)][index_of(to)]) t += c.bytes;
  return t;
}

std::uint64_t CommStats::total_received() const noexcept {
  std::uint64_t t = 0;
  for (const auto& row : received_bytes)
    for (auto b : row) t += b;
  return t;
}

void CommStats::merge(const CommStats& other) {
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t p = 0; p < kPhaseCount; ++p) {
        sent[s][r][p].bytes += other.sent[s][r][p].bytes;
        sent[s][r][p].messages += other.sent[s][r][p].messages;
      }
      received_bytes[s][r] += other.received_bytes[s][r];
    }
  }
  for (std::size_t p = 0; p < kPhaseCount; ++p) {
    rounds[p] = std::max(rounds[p], other.rounds[p]);
    wall_ms[p] = std::max(wall_ms[p], other.wall_ms[p]);
  }
  mul_elements += other.mul_elements;
  and_words += other.and_words;
  reveals += other.reveals;
}

Party::Party(PartyConfig config, std::unique_ptr<Transport> transport)
    : config_(config),
      transport_(std::move(transport)),
      prg_prev_(config.pairwise_seeds[index_of(config.id)], 0),
      prg_next_(config.pairwise_seeds[index_of(next_party(config.id))], 0),
      prg_private_(config.private_seed, 1 + index_of(config.id)) {}

Party::~Party() = default;
Party::Party(Party&&) noexcept = default;
Party& Party::operator=(Party&&) noexcept = default;

void Party::set_triples(std::unique_ptr<TripleStore> store) {
  triples_ = std::move(store);
}

void Party::exchange_seeds() {
  PhaseScope scope(*this, Phase::setup);
  const Ring mine = random_seed();
  const Ring payload[1] = {mine};
  const Outgoing out[1] = {{prev(), payload}};
  const Incoming in[1] = {{next(), 1}};
  const auto got = exchange(Opcode::seed_exchange, out, in);
  config_.pairwise_seeds[index_of(id())] = mine;
  config_.pairwise_seeds[index_of(next())] = got[0][0];
  config_.private_seed = random_seed();
  prg_prev_ = Prg(mine, 0);
  prg_next_ = Prg(got[0][0], 0);
  prg_private_ = Prg(config_.private_seed, 1 + index_of(id()));
}

std::vector<std::vector<Ring>> Party::exchange(Opcode opcode,
                                               std::span<const Outgoing> out,
                                               std::span<const Incoming> in) {
  const auto me = static_cast<std::uint8_t>(index_of(id()) + 1);
  const auto phase_idx = static_cast<std::size_t>(phase_);

  for (const Outgoing& o : out) {
    if (o.to == id()) throw FrameError("party cannot send to itself");
    FrameHeader h;
    h.phase = phase_;
    h.sender = me;
    h.receiver = static_cast<std::uint8_t>(index_of(o.to) + 1);
    h.opcode = opcode;
    h.sequence = send_seq_[index_of(o.to)]++;
    Bytes frame = encode_frame(h, o.payload);
    for (std::uint8_t b : frame) {
      transcript_ = (transcript_ ^ b) * 0x100000001b3ULL;
    }
    auto& c = stats_.sent[index_of(id())][index_of(o.to)][phase_idx];
    c.bytes += frame.size();
    c.messages += 1;
    transport_->send(o.to, std::move(frame));
  }

  std::vector<std::vector<Ring>> result;
  result.reserve(in.size());
  for (const Incoming& i : in) {
    Bytes frame = transport_->recv(i.from, config_.timeout);
    const FrameHeader h = decode_header(frame);
    const auto from = static_cast<std::uint8_t>(index_of(i.from) + 1);
    if (h.sender != from || h.receiver != me) {
      throw ProtocolDesyncError("frame routed " + std::to_string(h.sender) +
                                "->" + std::to_string(h.receiver) +
                                ", expected " + std::to_string(from) + "->" +
                                std::to_string(me));
    }
    const std::uint64_t want_seq = recv_seq_[index_of(i.from)]++;
    if (h.sequence != want_seq) {
      throw ProtocolDesyncError("sequence " + std::to_string(h.sequence) +
                                ", expected " + std::to_string(want_seq));
    }
    if (h.opcode != opcode) {
      throw ProtocolDesyncError(
          "opcode " + std::to_string(static_cast<int>(h.opcode)) +
          ", expected " + std::to_string(static_cast<int>(opcode)));
    }
    if (h.payload_bytes != i.count * sizeof(Ring)) {
      throw FrameError("payload of " + std::to_string(h.payload_bytes) +
                       " bytes, declared " +
                       std::to_string(i.count * sizeof(Ring)));
    }
    stats_.received_bytes[index_of(i.from)][index_of(id())] += frame.size();
    result.push_back(decode_payload(frame));
  }
  stats_.rounds[phase_idx] += 1;
  return result;
}

PhaseScope::PhaseScope(Party& party, Phase phase, bool weak)
    : party_(party),
      saved_(party.phase_),
      saved_pinned_(party.phase_pinned_),
      active_(!(weak && party.phase_pinned_)),
      start_(std::chrono::steady_clock::now()) {
  if (active_) {
    party_.phase_ = phase;
    party_.phase_pinned_ = !weak;
  }
}

PhaseScope::~PhaseScope() {
  if (!active_) return;
  const double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start_)
                        .count();
  party_.stats_.wall_ms[static_cast<std::size_t>(party_.phase_)] += ms;
  party_.phase_ = saved_;
  party_.phase_pinned_ = saved_pinned_;
}

}  // namespace privswarm
