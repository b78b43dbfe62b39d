#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "privswarm/fixed_point.hpp"
#include "privswarm/prg.hpp"
#include "privswarm/sharing.hpp"
#include "privswarm/transport.hpp"
#include "privswarm/wire.hpp"

namespace privswarm {

class TripleStore;

enum class PartyKind { uav_node, operator_station, computation_server };
std::string_view party_kind_name(PartyKind k) noexcept;

struct PartyRole {
  PartyId id = PartyId::p1;
  PartyKind kind = PartyKind::computation_server;  // descriptive only
};

enum class MulBackend { replicated, triples };
enum class CarryMode { ripple, parallel_prefix };

struct LinkCounters {
  std::uint64_t bytes = 0;
  std::uint64_t messages = 0;
};

// Byte/message/round accounting. Bytes are whole frames (header + payload).
struct CommStats {
  // [sender][receiver][phase]
  std::array<std::array<std::array<LinkCounters, kPhaseCount>, 3>, 3> sent{};
  std::array<std::array<std::uint64_t, 3>, 3> received_bytes{};  // [from][to]
  std::array<std::uint64_t, kPhaseCount> rounds{};
  std::array<double, kPhaseCount> wall_ms{};
  // Elements resolved by interactive arithmetic multiplication.
  std::uint64_t mul_elements = 0;
  std::uint64_t and_words = 0;
  std::uint64_t reveals = 0;

  std::uint64_t total_bytes() const noexcept;
  std::uint64_t total_rounds() const noexcept;
  std::uint64_t total_messages() const noexcept;
  std::uint64_t phase_bytes(Phase p) const noexcept;
  std::uint64_t pair_bytes(PartyId from, PartyId to) const noexcept;
  std::uint64_t total_received() const noexcept;

  // Sums byte and gate counters; rounds take the maximum since every party
  // takes part in every round.
  void merge(const CommStats& other);
};

struct PartyConfig {
  PartyId id = PartyId::p1;
  FixedPoint fixed_point{};
  // seeds[i] is shared by parties i and i-1 (mod 3). Party i uses seeds[i]
  // and seeds[i+1].
  std::array<std::uint64_t, 3> pairwise_seeds{};
  std::uint64_t private_seed = 0;
  MulBackend mul_backend = MulBackend::replicated;
  CarryMode carry_mode = CarryMode::ripple;
  std::chrono::milliseconds timeout{30000};
};

struct Outgoing {
  PartyId to;
  std::span<const Ring> payload;
};
struct Incoming {
  PartyId from;
  std::size_t count;
};

// One party's protocol engine: a sequential executor owning its PRGs, its
// transport endpoint, and its own accounting.
class Party {
 public:
  Party(PartyConfig config, std::unique_ptr<Transport> transport);
  ~Party();
  Party(Party&&) noexcept;
  Party& operator=(Party&&) noexcept;

  PartyId id() const noexcept { return config_.id; }
  PartyId next() const noexcept { return next_party(config_.id); }
  PartyId prev() const noexcept { return prev_party(config_.id); }
  const PartyConfig& config() const noexcept { return config_; }
  const FixedPoint& fixed_point() const noexcept { return config_.fixed_point; }
  int frac_bits() const noexcept { return config_.fixed_point.frac_bits(); }

  // PRG on seeds[id], shared with the previous party.
  Prg& prg_with_prev() noexcept { return prg_prev_; }
  // PRG on seeds[id + 1], shared with the next party.
  Prg& prg_with_next() noexcept { return prg_next_; }
  Prg& prg_private() noexcept { return prg_private_; }

  // One synchronous round: send every outgoing payload, then block until
  // every declared incoming payload has arrived. All three parties must
  // call exchange for every round, possibly with nothing to send.
  std::vector<std::vector<Ring>> exchange(Opcode opcode,
                                          std::span<const Outgoing> out,
                                          std::span<const Incoming> in);

  const CommStats& stats() const noexcept { return stats_; }
  CommStats& stats() noexcept { return stats_; }
  void reset_stats() noexcept { stats_ = CommStats{}; }
  // FNV-1a digest over every frame this party has sent.
  std::uint64_t transcript_digest() const noexcept { return transcript_; }

  Phase phase() const noexcept { return phase_; }

  // Draws a fresh seeds[id] and sends it to the previous party, receiving
  // seeds[id + 1] from the next one. Billed to the setup phase.
  void exchange_seeds();

  void set_triples(std::unique_ptr<TripleStore> store);
  TripleStore* triples() noexcept { return triples_.get(); }

  Transport& transport() noexcept { return *transport_; }

 private:
  friend class PhaseScope;

  PartyConfig config_;
  std::unique_ptr<Transport> transport_;
  Prg prg_prev_;
  Prg prg_next_;
  Prg prg_private_;
  CommStats stats_;
  std::array<std::uint64_t, 3> send_seq_{};
  std::array<std::uint64_t, 3> recv_seq_{};
  std::uint64_t transcript_ = 0xcbf29ce484222325ULL;
  Phase phase_ = Phase::setup;
  bool phase_pinned_ = false;
  std::unique_ptr<TripleStore> triples_;
};

// Sets the accounting phase for its lifetime. A weak scope (used by the
// generic primitives) leaves an enclosing kernel's phase in place so that,
// e.g., the multiplications inside SoftMax are billed to "softmax".
class PhaseScope {
 public:
  PhaseScope(Party& party, Phase phase, bool weak = false);
  ~PhaseScope();
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

 private:
  Party& party_;
  Phase saved_;
  bool saved_pinned_;
  bool active_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace privswarm
