#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

#include "privswarm/party.hpp"

namespace privswarm {

enum class TransportKind { in_process, tcp };

struct SessionConfig {
  std::vector<PartyRole> parties{{PartyId::p1, PartyKind::uav_node},
                                 {PartyId::p2, PartyKind::operator_station},
                                 {PartyId::p3, PartyKind::computation_server}};
  TransportKind transport = TransportKind::in_process;
  // With a seed every random choice (pairwise seeds, input masks) derives
  // from it and runs are reproducible. Without one, each party draws its
  // own seeds and sends them to its neighbour during setup.
  std::optional<std::uint64_t> seed{};
  FixedPoint fixed_point{};
  MulBackend mul_backend = MulBackend::replicated;
  CarryMode carry_mode = CarryMode::ripple;
  // Triples dealt to each party when mul_backend == triples.
  std::size_t triples = 0;
  std::chrono::milliseconds latency{0};
  std::chrono::milliseconds timeout{30000};
  // Identifies the model all parties agreed to evaluate.
  std::uint64_t model_digest = 0;
};

// Running in-process three-party session. Each call to run() executes the
// same program once per party on its own thread.
class Session {
 public:
  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;
  ~Session();

  // Throws HandshakeError for anything other than three distinct parties
  // and TransportError if the transport cannot be brought up.
  friend Session establish_session(const SessionConfig& config);

  template <class F>
  auto run(F&& program) {
    using R = std::invoke_result_t<F&, Party&>;
    if constexpr (std::is_void_v<R>) {
      run_impl([&](Party& p, int) { program(p); });
    } else {
      std::array<std::optional<R>, 3> slots;
      run_impl([&](Party& p, int i) { slots[i].emplace(program(p)); });
      return std::array<R, 3>{std::move(*slots[0]), std::move(*slots[1]),
                              std::move(*slots[2])};
    }
  }

  Party& party(PartyId id) { return *parties_[index_of(id)]; }
  const SessionConfig& config() const noexcept { return config_; }
  std::uint64_t id() const noexcept { return session_id_; }

  // Accounting merged over the three parties.
  CommStats stats() const;
  void reset_stats();
  std::array<std::uint64_t, 3> transcript_digests() const;

 private:
  Session() = default;
  void run_impl(const std::function<void(Party&, int)>& body);

  SessionConfig config_;
  std::uint64_t session_id_ = 0;
  std::shared_ptr<InProcessHub> hub_;
  std::array<std::unique_ptr<Party>, 3> parties_;
};

Session establish_session(const SessionConfig& config);

// Digest of everything the parties must agree on before any protocol step.
std::uint64_t config_digest(const SessionConfig& config);

// Per-party configuration derived from a session seed. Exposed for
// multi-process deployments where each process builds one Party.
PartyConfig derive_party_config(const SessionConfig& config, PartyId id);

// Builds one party of a TCP deployment (one process per party). `listen`
// is this party's endpoint; `peers[i]` is party i's endpoint.
std::unique_ptr<Party> establish_tcp_party(const SessionConfig& config,
                                           PartyId id,
                                           const std::array<Endpoint, 3>& peers);

// Human-readable summary: KB per phase and per ordered pair.
struct CommReport {
  struct PhaseRow {
    Phase phase;
    std::uint64_t bytes;
    std::uint64_t messages;
    std::uint64_t rounds;
    double wall_ms;
  };
  struct PairRow {
    PartyId from, to;
    std::uint64_t bytes;
  };
  std::vector<PhaseRow> phases;
  std::vector<PairRow> pairs;
  std::uint64_t total_bytes = 0;
  std::uint64_t total_rounds = 0;
};

CommReport comm_report(const CommStats& stats);
CommReport comm_report(const Session& session);
// bytes / 1024 rendered with one decimal.
std::string format_kb(std::uint64_t bytes);

}  // namespace privswarm
