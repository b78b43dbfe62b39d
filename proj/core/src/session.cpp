#include "privswarm/session.hpp"

#include <cstdio>
#include <mutex>
#include <set>

#include "privswarm/errors.hpp"
#include "privswarm/prg.hpp"
#include "privswarm/triples.hpp"

namespace privswarm {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  std::uint64_t s = h ^ v;
  return splitmix64(s);
}

void check_roles(const SessionConfig& config) {
  if (config.parties.size() != 3) {
    throw HandshakeError("a session needs exactly three parties, got " +
                         std::to_string(config.parties.size()));
  }
  std::set<PartyId> ids;
  for (const auto& r : config.parties) ids.insert(r.id);
  if (ids.size() != 3) throw HandshakeError("party ids must be distinct");
}

}  // namespace

std::uint64_t config_digest(const SessionConfig& config) {
  std::uint64_t h = 0x5052495653574dULL;
  h = mix(h, static_cast<std::uint64_t>(config.fixed_point.frac_bits()));
  h = mix(h, config.seed.has_value() ? 1 + *config.seed : 0);
  h = mix(h, static_cast<std::uint64_t>(config.mul_backend));
  h = mix(h, static_cast<std::uint64_t>(config.carry_mode));
  h = mix(h, config.model_digest);
  return h;
}

PartyConfig derive_party_config(const SessionConfig& config, PartyId id) {
  PartyConfig pc;
  pc.id = id;
  pc.fixed_point = config.fixed_point;
  pc.mul_backend = config.mul_backend;
  pc.carry_mode = config.carry_mode;
  pc.timeout = config.timeout;
  if (config.seed) {
    std::uint64_t state = *config.seed;
    for (auto& s : pc.pairwise_seeds) s = splitmix64(state);
    std::uint64_t priv = 0;
    for (int i = 0; i <= index_of(id); ++i) priv = splitmix64(state);
    pc.private_seed = priv;
  }
  return pc;
}

Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&&) noexcept = default;
Session::~Session() = default;

Session establish_session(const SessionConfig& config) {
  check_roles(config);
  Session s;
  s.config_ = config;
  s.session_id_ = config.seed ? mix(config_digest(config), 0x51d) : random_seed();

  std::array<std::unique_ptr<Transport>, 3> transports;
  if (config.transport == TransportKind::in_process) {
    s.hub_ = InProcessHub::create(config.latency);
    for (PartyId p : kAllParties) transports[index_of(p)] = s.hub_->endpoint(p);
  } else {
    std::array<std::optional<TcpListener>, 3> listeners;
    std::array<Endpoint, 3> peers;
    for (int i = 0; i < 3; ++i) {
      listeners[i].emplace(Endpoint{"127.0.0.1", 0});
      peers[i] = Endpoint{"127.0.0.1", listeners[i]->port()};
    }
    const std::uint64_t digest = config_digest(config);
    std::array<std::exception_ptr, 3> errors;
    std::vector<std::thread> threads;
    for (int i = 0; i < 3; ++i) {
      threads.emplace_back([&, i] {
        try {
          transports[i] = TcpTransport::connect(
              party_at(i), std::move(*listeners[i]), peers, digest,
              config.timeout);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (PartyId p : kAllParties) {
    s.parties_[index_of(p)] = std::make_unique<Party>(
        derive_party_config(config, p), std::move(transports[index_of(p)]));
  }
  if (config.mul_backend == MulBackend::triples) {
    auto stores = deal_triples(config.triples,
                               config.seed ? *config.seed ^ 0xdea1 : random_seed());
    for (int i = 0; i < 3; ++i) s.parties_[i]->set_triples(std::move(stores[i]));
  }
  if (!config.seed) {
    s.run([](Party& p) { p.exchange_seeds(); });
  }
  return s;
}

void Session::run_impl(const std::function<void(Party&, int)>& body) {
  std::array<std::exception_ptr, 3> errors;
  std::mutex first_mu;
  int first = -1;
  auto worker = [&](int i) {
    try {
      body(*parties_[i], i);
    } catch (...) {
      errors[i] = std::current_exception();
      {
        std::lock_guard lock(first_mu);
        if (first < 0) first = i;
      }
      // Wake the other parties so they fail instead of waiting for frames
      // that will never come.
      for (auto& p : parties_) p->transport().abort();
    }
  };
  std::thread t1(worker, 1), t2(worker, 2);
  worker(0);
  t1.join();
  t2.join();
  if (first >= 0) std::rethrow_exception(errors[first]);
}

CommStats Session::stats() const {
  CommStats total;
  for (const auto& p : parties_) total.merge(p->stats());
  return total;
}

void Session::reset_stats() {
  for (auto& p : parties_) p->reset_stats();
}

std::array<std::uint64_t, 3> Session::transcript_digests() const {
  return {parties_[0]->transcript_digest(), parties_[1]->transcript_digest(),
          parties_[2]->transcript_digest()};
}

std::unique_ptr<Party> establish_tcp_party(const SessionConfig& config,
                                           PartyId id,
                                           const std::array<Endpoint, 3>& peers) {
  check_roles(config);
  TcpListener listener(peers[index_of(id)]);
  auto transport = TcpTransport::connect(id, std::move(listener), peers,
                                         config_digest(config), config.timeout);
  auto party =
      std::make_unique<Party>(derive_party_config(config, id), std::move(transport));
  if (config.mul_backend == MulBackend::triples) {
    auto stores = deal_triples(config.triples,
                               config.seed ? *config.seed ^ 0xdea1 : 0);
    party->set_triples(std::move(stores[index_of(id)]));
  }
  if (!config.seed) party->exchange_seeds();
  return party;
}

CommReport comm_report(const CommStats& stats) {
  CommReport r;
  for (std::size_t i = 0; i < kPhaseCount; ++i) {
    const auto ph = static_cast<Phase>(i);
    std::uint64_t msgs = 0;
    for (const auto& row : stats.sent)
      for (const auto& link : row) msgs += link[i].messages;
    r.phases.push_back({ph, stats.phase_bytes(ph), msgs, stats.rounds[i],
                        stats.wall_ms[i]});
  }
  for (PartyId a : kAllParties) {
    for (PartyId b : kAllParties) {
      if (a != b) r.pairs.push_back({a, b, stats.pair_bytes(a, b)});
    }
  }
  r.total_bytes = stats.total_bytes();
  r.total_rounds = stats.total_rounds();
  return r;
}

CommReport comm_report(const Session& session) {
  return comm_report(session.stats());
}

std::string format_kb(std::uint64_t bytes) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", static_cast<double>(bytes) / 1024.0);
  return buf;
}

}  // namespace privswarm
