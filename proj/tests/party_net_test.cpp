#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "privswarm/errors.hpp"
#include "privswarm/protocols.hpp"
#include "privswarm/session.hpp"
#include "privswarm/wire.hpp"
#include "test_util.hpp"

namespace privswarm {
namespace {

using namespace std::chrono_literals;
using testing::deal;
using testing::open;

TEST(Wire, FrameLayoutIsBitExact) {
  FrameHeader h;
  h.phase = Phase::mul;
  h.sender = 2;
  h.receiver = 1;
  h.opcode = Opcode::mul;
  h.sequence = 0x0102030405060708ULL;
  const Ring payload[2] = {0x1122334455667788ULL, 1};
  const Bytes f = encode_frame(h, payload);
  ASSERT_EQ(f.size(), 16u + 16u);
  const std::vector<std::uint8_t> head(f.begin(), f.begin() + 16);
  EXPECT_EQ(head, (std::vector<std::uint8_t>{16, 0, 0, 0, 3, 2, 1, 3, 8, 7, 6, 5,
                                             4, 3, 2, 1}));
  EXPECT_EQ(f[16], 0x88);
  EXPECT_EQ(f[23], 0x11);
  EXPECT_EQ(f[24], 1);
  h.payload_bytes = 16;
  EXPECT_EQ(decode_header(f), h);
  EXPECT_EQ(decode_payload(f), std::vector<Ring>(payload, payload + 2));
}

TEST(Wire, RejectsMalformedHeaders) {
  Bytes f = encode_frame(FrameHeader{}, std::vector<Ring>{1});
  Bytes big = f;
  put_u32(big.data(), 1u << 31);
  EXPECT_THROW(decode_header(big), FrameError);
  Bytes odd = f;
  put_u32(odd.data(), 7);
  EXPECT_THROW(decode_header(odd), FrameError);
  Bytes phase = f;
  phase[4] = 42;
  EXPECT_THROW(decode_header(phase), FrameError);
  EXPECT_THROW(decode_header(std::span(f).first(10)), FrameError);
}

TEST(Session, FreshSessionIsSilent) {
  auto s = establish_session(testing::seeded(7));
  EXPECT_EQ(s.stats().total_bytes(), 0u);
  const CommReport r = comm_report(s);
  EXPECT_EQ(r.total_bytes, 0u);
  for (const auto& row : r.phases) EXPECT_EQ(row.bytes, 0u);
  for (const auto& row : r.pairs) EXPECT_EQ(row.bytes, 0u);
  EXPECT_EQ(format_kb(r.total_bytes), "0.0");
}

TEST(Session, RejectsWrongArity) {
  SessionConfig c = testing::seeded(1);
  c.parties.pop_back();
  EXPECT_THROW(establish_session(c), HandshakeError);
  c = testing::seeded(1);
  c.parties[2].id = PartyId::p1;
  EXPECT_THROW(establish_session(c), HandshakeError);
}

TEST(Session, EmptyRoundCountsOnlyTheRound) {
  auto s = establish_session(testing::seeded(2));
  s.run([](Party& p) { p.exchange(Opcode::mul, {}, {}); });
  EXPECT_EQ(s.stats().total_bytes(), 0u);
  EXPECT_EQ(s.stats().total_rounds(), 1u);
}

TEST(Session, OneSenderFourValues) {
  auto s = establish_session(testing::seeded(3));
  s.run([](Party& p) {
    const Ring v[4] = {1, 2, 3, 4};
    if (p.id() == PartyId::p1) {
      const Outgoing out[1] = {{PartyId::p2, v}};
      p.exchange(Opcode::mul, out, {});
    } else if (p.id() == PartyId::p2) {
      const Incoming in[1] = {{PartyId::p1, 4}};
      auto got = p.exchange(Opcode::mul, {}, in);
      if (got[0] != std::vector<Ring>(v, v + 4)) throw ValidationError("payload");
    } else {
      p.exchange(Opcode::mul, {}, {});
    }
  });
  const auto st = s.stats();
  EXPECT_EQ(st.pair_bytes(PartyId::p1, PartyId::p2), 4u * 8 + 16);
  EXPECT_EQ(st.total_bytes(), 4u * 8 + 16);
  EXPECT_EQ(st.total_received(), st.total_bytes());
}

TEST(Session, DeclaredLengthMismatchIsFrameError) {
  auto s = establish_session(testing::seeded(4));
  EXPECT_THROW(s.run([](Party& p) {
    const Ring v[3] = {1, 2, 3};
    if (p.id() == PartyId::p1) {
      const Outgoing out[1] = {{PartyId::p2, v}};
      p.exchange(Opcode::mul, out, {});
    } else if (p.id() == PartyId::p2) {
      const Incoming in[1] = {{PartyId::p1, 4}};
      p.exchange(Opcode::mul, {}, in);
    } else {
      p.exchange(Opcode::mul, {}, {});
    }
  }),
               FrameError);
}

TEST(Session, MissingMessageIsDesync) {
  SessionConfig c = testing::seeded(5);
  c.timeout = 200ms;
  auto s = establish_session(c);
  EXPECT_THROW(s.run([](Party& p) {
    if (p.id() == PartyId::p2) {
      const Incoming in[1] = {{PartyId::p1, 1}};
      p.exchange(Opcode::mul, {}, in);
    }
  }),
               ProtocolDesyncError);
}

TEST(Session, OpcodeMismatchIsDesync) {
  auto s = establish_session(testing::seeded(6));
  EXPECT_THROW(s.run([](Party& p) {
    const Ring v[1] = {9};
    if (p.id() == PartyId::p1) {
      const Outgoing out[1] = {{PartyId::p2, v}};
      p.exchange(Opcode::trunc, out, {});
    } else if (p.id() == PartyId::p2) {
      const Incoming in[1] = {{PartyId::p1, 1}};
      p.exchange(Opcode::mul, {}, in);
    }
  }),
               ProtocolDesyncError);
}

testing::Views run_mul(Session& s, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Ring> x(k), y(k);
  for (auto& v : x) v = rng();
  for (auto& v : y) v = rng();
  const auto xs = deal(x, {k}, 0, rng);
  const auto ys = deal(y, {k}, 0, rng);
  return testing::run_binary(s, xs, ys, [](Party& p, const SharedTensor& a,
                                           const SharedTensor& b) {
    return mul(p, a, b);
  });
}

TEST(Session, MulTrafficPattern) {
  auto s = establish_session(testing::seeded(8));
  const std::size_t k = 37;
  run_mul(s, k, 1);
  const CommStats st = s.stats();
  for (PartyId p : kAllParties) {
    EXPECT_EQ(st.pair_bytes(p, prev_party(p)), k * 8 + 16);
    EXPECT_EQ(st.pair_bytes(p, next_party(p)), 0u);
  }
  EXPECT_EQ(st.total_messages(), 3u);
  EXPECT_EQ(st.total_rounds(), 1u);
  const CommReport r = comm_report(st);
  std::uint64_t phase_sum = 0, pair_sum = 0;
  for (const auto& row : r.phases) phase_sum += row.bytes;
  for (const auto& row : r.pairs) pair_sum += row.bytes;
  EXPECT_EQ(phase_sum, r.total_bytes);
  EXPECT_EQ(pair_sum, r.total_bytes);
  EXPECT_EQ(st.phase_bytes(Phase::mul), r.total_bytes);
  EXPECT_EQ(st.total_received(), st.total_bytes());
}

TEST(Session, SameSeedSameTranscript) {
  auto a = establish_session(testing::seeded(9));
  auto b = establish_session(testing::seeded(9));
  const auto ra = run_mul(a, 64, 2);
  const auto rb = run_mul(b, 64, 2);
  for (int p = 0; p < 3; ++p) {
    EXPECT_EQ(ra[p].first, rb[p].first);
    EXPECT_EQ(ra[p].second, rb[p].second);
  }
  EXPECT_EQ(a.transcript_digests(), b.transcript_digests());
  auto c = establish_session(testing::seeded(10));
  run_mul(c, 64, 2);
  EXPECT_NE(a.transcript_digests(), c.transcript_digests());
}

TEST(Session, SeedExchangeWithoutMasterSeed) {
  SessionConfig c;
  auto s = establish_session(c);
  const CommStats st = s.stats();
  EXPECT_EQ(st.phase_bytes(Phase::setup), 3u * (8 + 16));
  EXPECT_EQ(st.rounds[static_cast<std::size_t>(Phase::setup)], 1u);
  s.reset_stats();
  std::mt19937_64 rng(3);
  const auto xs = deal({6}, {1}, 0, rng);
  const auto ys = deal({7}, {1}, 0, rng);
  const auto z = testing::run_binary(s, xs, ys, [](Party& p, const SharedTensor& a,
                                                   const SharedTensor& b) {
    return mul(p, a, b);
  });
  EXPECT_EQ(open(z)[0], 42u);
}

TEST(Session, TcpMatchesInProcess) {
  SessionConfig c = testing::seeded(11);
  auto local = establish_session(c);
  c.transport = TransportKind::tcp;
  auto tcp = establish_session(c);
  const auto a = run_mul(local, 100, 4);
  const auto b = run_mul(tcp, 100, 4);
  for (int p = 0; p < 3; ++p) {
    EXPECT_EQ(a[p].first, b[p].first);
    EXPECT_EQ(a[p].second, b[p].second);
  }
  EXPECT_EQ(local.stats().total_bytes(), tcp.stats().total_bytes());
  EXPECT_EQ(local.transcript_digests(), tcp.transcript_digests());
}

TEST(Session, TcpConfigDisagreementIsHandshakeError) {
  std::array<Endpoint, 3> peers;
  std::vector<TcpListener> listeners;
  for (int i = 0; i < 3; ++i) {
    listeners.emplace_back(Endpoint{"127.0.0.1", 0});
    peers[i] = Endpoint{"127.0.0.1", listeners.back().port()};
  }
  std::array<std::exception_ptr, 3> errors;
  std::vector<std::thread> threads;
  for (int i = 0; i < 3; ++i) {
    threads.emplace_back([&, i] {
      try {
        SessionConfig c = testing::seeded(12, i == 0 ? 20 : 16);
        c.timeout = 2000ms;
        TcpTransport::connect(party_at(i), std::move(listeners[i]), peers,
                              config_digest(c), c.timeout);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  // P1 holds the odd configuration and sees it first-hand; a peer that only
  // notices because P2 already hung up reports a transport failure instead.
  for (int i = 0; i < 3; ++i) ASSERT_TRUE(errors[i]) << i;
  EXPECT_THROW(std::rethrow_exception(errors[0]), HandshakeError);
  int handshake = 0;
  for (int i = 1; i < 3; ++i) {
    try {
      std::rethrow_exception(errors[i]);
    } catch (const HandshakeError&) {
      ++handshake;
    } catch (const TransportError&) {
    }
  }
  EXPECT_GE(handshake, 1);
}

TEST(Session, LatencyKnobDelaysDelivery) {
  SessionConfig c = testing::seeded(13);
  c.latency = 30ms;
  auto s = establish_session(c);
  const auto t0 = std::chrono::steady_clock::now();
  run_mul(s, 4, 5);
  EXPECT_GE(std::chrono::steady_clock::now() - t0, 30ms);
}

TEST(Session, PhaseScopesBillEnclosingKernel) {
  auto s = establish_session(testing::seeded(14));
  std::mt19937_64 rng(6);
  const auto xs = deal({1, 2}, {2}, 0, rng);
  s.run([&](Party& p) {
    PhaseScope scope(p, Phase::softmax);
    (void)mul(p, xs[index_of(p.id())], xs[index_of(p.id())]);
  });
  EXPECT_EQ(s.stats().phase_bytes(Phase::mul), 0u);
  EXPECT_EQ(s.stats().phase_bytes(Phase::softmax), 3u * (16 + 16));
}

}  // namespace
}  // namespace privswarm
