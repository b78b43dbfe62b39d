#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "privswarm/sharing.hpp"
#include "privswarm/wire.hpp"

namespace privswarm {

// Point-to-point frame delivery for one party. Frames are opaque here; the
// Party layer validates headers and does the accounting.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(PartyId to, Bytes frame) = 0;
  // Throws ProtocolDesyncError when nothing arrives within `timeout` and
  // TransportError once the transport is aborted or the peer hangs up.
  virtual Bytes recv(PartyId from, std::chrono::milliseconds timeout) = 0;
  // Unblocks all pending and future recv calls with a TransportError.
  virtual void abort() noexcept = 0;
};

// Queue-backed channels between three in-process parties.
class InProcessHub : public std::enable_shared_from_this<InProcessHub> {
 public:
  static std::shared_ptr<InProcessHub> create(
      std::chrono::milliseconds latency = std::chrono::milliseconds{0});

  std::unique_ptr<Transport> endpoint(PartyId self);
  void abort() noexcept;

 private:
  friend class InProcessEndpoint;
  explicit InProcessHub(std::chrono::milliseconds latency)
      : latency_(latency) {}

  struct Envelope {
    std::chrono::steady_clock::time_point deliver_at;
    Bytes frame;
  };
  struct Channel {
    std::deque<Envelope> queue;
  };

  void push(PartyId from, PartyId to, Bytes frame);
  Bytes pop(PartyId from, PartyId to, std::chrono::milliseconds timeout);

  std::chrono::milliseconds latency_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool aborted_ = false;
  std::array<std::array<Channel, 3>, 3> channels_;  // [from][to]
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// Accepts "host:port". Throws TransportError on malformed input.
Endpoint parse_endpoint(const std::string& text);

// A bound, listening socket. Port 0 picks an ephemeral port.
class TcpListener {
 public:
  explicit TcpListener(const Endpoint& at);
  ~TcpListener();
  TcpListener(TcpListener&& other) noexcept;
  TcpListener& operator=(TcpListener&&) = delete;
  TcpListener(const TcpListener&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  int release() noexcept;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// One TCP connection per ordered pair of parties carrying length-prefixed
// frames. Outbound frames are written by a per-peer writer thread so that a
// party never blocks on a full socket buffer while its peer is still sending.
class TcpTransport : public Transport {
 public:
  // `peers[i]` is the listening endpoint of party i; the entry for `self` is
  // ignored. `digest` must agree across parties or HandshakeError is thrown.
  static std::unique_ptr<TcpTransport> connect(
      PartyId self, TcpListener listener, const std::array<Endpoint, 3>& peers,
      std::uint64_t digest, std::chrono::milliseconds timeout);

  ~TcpTransport() override;

  void send(PartyId to, Bytes frame) override;
  Bytes recv(PartyId from, std::chrono::milliseconds timeout) override;
  void abort() noexcept override;

 private:
  TcpTransport() = default;

  struct Writer {
    int fd = -1;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Bytes> queue;
    bool stop = false;
    bool failed = false;
    std::thread thread;
  };

  void run_writer(Writer& w);

  PartyId self_ = PartyId::p1;
  std::array<int, 3> inbound_{-1, -1, -1};
  std::array<std::unique_ptr<Writer>, 3> outbound_;
  std::atomic<bool> aborted_{false};
};

}  // namespace privswarm
