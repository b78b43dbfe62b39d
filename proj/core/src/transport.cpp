#include "privswarm/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "privswarm/errors.hpp"

namespace privswarm {

// ---------------------------------------------------------------- in-process

class InProcessEndpoint : public Transport {
 public:
  InProcessEndpoint(std::shared_ptr<InProcessHub> hub, PartyId self)
      : hub_(std::move(hub)), self_(self) {}

  void send(PartyId to, Bytes frame) override {
    hub_->push(self_, to, std::move(frame));
  }
  Bytes recv(PartyId from, std::chrono::milliseconds timeout) override {
    return hub_->pop(from, self_, timeout);
  }
  void abort() noexcept override { hub_->abort(); }

 private:
  std::shared_ptr<InProcessHub> hub_;
  PartyId self_;
};

std::shared_ptr<InProcessHub> InProcessHub::create(
    std::chrono::milliseconds latency) {
  return std::shared_ptr<InProcessHub>(new InProcessHub(latency));
}

std::unique_ptr<Transport> InProcessHub::endpoint(PartyId self) {
  return std::make_unique<InProcessEndpoint>(shared_from_this(), self);
}

void InProcessHub::abort() noexcept {
  {
    std::lock_guard lock(mu_);
    aborted_ = true;
  }
  cv_.notify_all();
}

void InProcessHub::push(PartyId from, PartyId to, Bytes frame) {
  {
    std::lock_guard lock(mu_);
    if (aborted_) throw TransportError("transport aborted");
    channels_[index_of(from)][index_of(to)].queue.push_back(
        Envelope{std::chrono::steady_clock::now() + latency_, std::move(frame)});
  }
  cv_.notify_all();
}

Bytes InProcessHub::pop(PartyId from, PartyId to,
                        std::chrono::milliseconds timeout) {
  auto& q = channels_[index_of(from)][index_of(to)].queue;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::unique_lock lock(mu_);
  for (;;) {
    if (aborted_) throw TransportError("transport aborted");
    if (!q.empty()) {
      const auto ready = q.front().deliver_at;
      if (ready <= std::chrono::steady_clock::now()) break;
      cv_.wait_until(lock, ready);
      continue;
    }
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout &&
        q.empty() && !aborted_) {
      throw ProtocolDesyncError("no message from P" +
                                std::to_string(index_of(from) + 1) +
                                " within timeout");
    }
  }
  Bytes out = std::move(q.front().frame);
  q.pop_front();
  return out;
}

// ----------------------------------------------------------------------- tcp

namespace {

constexpr std::uint32_t kHelloMagic = 0x48575350;  // "PSWH"
constexpr std::size_t kHelloBytes = 13;

[[noreturn]] void throw_errno(const std::string& what) {
  throw TransportError(what + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

// Reads exactly n bytes, waiting at most until `deadline` for each chunk.
void read_all(int fd, std::uint8_t* data, std::size_t n,
              std::chrono::steady_clock::time_point deadline,
              const std::atomic<bool>& aborted) {
  while (n > 0) {
    if (aborted) throw TransportError("transport aborted");
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      throw ProtocolDesyncError("tcp receive timed out");
    }
    pollfd p{fd, POLLIN, 0};
    const int slice = static_cast<int>(std::min<long long>(left.count(), 100));
    const int rc = ::poll(&p, 1, slice);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw_errno("poll");
    }
    if (rc == 0) continue;
    const ssize_t r = ::recv(fd, data, n, 0);
    if (r == 0) throw TransportError("peer closed connection");
    if (r < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw_errno("recv");
    }
    data += r;
    n -= static_cast<std::size_t>(r);
  }
}

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

int connect_with_retry(const Endpoint& ep,
                       std::chrono::steady_clock::time_point deadline) {
  const sockaddr_in addr = resolve(ep);
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) ==
        0) {
      set_nodelay(fd);
      return fd;
    }
    ::close(fd);
    if (std::chrono::steady_clock::now() > deadline) {
      throw TransportError("cannot connect to " + ep.host + ":" +
                           std::to_string(ep.port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw TransportError("endpoint must be host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw TransportError("bad port in endpoint '" + text + "'");
  }
  return ep;
}

TcpListener::TcpListener(const Endpoint& at) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(at);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    throw_errno("bind " + at.host + ":" + std::to_string(at.port));
  }
  if (::listen(fd_, 8) != 0) throw_errno("listen");
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

TcpListener::TcpListener(TcpListener&& other) noexcept
    : fd_(other.fd_), port_(other.port_) {
  other.fd_ = -1;
}

int TcpListener::release() noexcept {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

std::unique_ptr<TcpTransport> TcpTransport::connect(
    PartyId self, TcpListener listener, const std::array<Endpoint, 3>& peers,
    std::uint64_t digest, std::chrono::milliseconds timeout) {
  std::unique_ptr<TcpTransport> t(new TcpTransport());
  t->self_ = self;
  const int lfd = listener.release();
  const auto deadline = std::chrono::steady_clock::now() + timeout;

  std::uint8_t hello[kHelloBytes];
  put_u32(hello, kHelloMagic);
  hello[4] = static_cast<std::uint8_t>(index_of(self));
  put_u64(hello + 5, digest);

  try {
    // Outbound: connect to every peer's listener and announce ourselves.
    for (PartyId peer : kAllParties) {
      if (peer == self) continue;
      const int fd = connect_with_retry(peers[index_of(peer)], deadline);
      write_all(fd, hello, kHelloBytes);
      auto w = std::make_unique<Writer>();
      w->fd = fd;
      t->outbound_[index_of(peer)] = std::move(w);
    }
    // Inbound: accept the two peers' connections and check their hello.
    for (int accepted = 0; accepted < 2;) {
      pollfd p{lfd, POLLIN, 0};
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw TransportError("timed out accepting peers");
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) continue;
      const int fd = ::accept(lfd, nullptr, nullptr);
      if (fd < 0) throw_errno("accept");
      set_nodelay(fd);
      std::uint8_t in[kHelloBytes];
      read_all(fd, in, kHelloBytes, deadline, t->aborted_);
      const int sender = in[4];
      if (get_u32(in) != kHelloMagic || sender > 2 ||
          sender == index_of(self) || t->inbound_[sender] >= 0) {
        ::close(fd);
        throw HandshakeError("unexpected peer hello");
      }
      if (get_u64(in + 5) != digest) {
        ::close(fd);
        throw HandshakeError("peer P" + std::to_string(sender + 1) +
                             " disagrees on session configuration");
      }
      t->inbound_[sender] = fd;
      ++accepted;
    }
  } catch (...) {
    ::close(lfd);
    throw;
  }
  ::close(lfd);

  for (auto& w : t->outbound_) {
    if (w) w->thread = std::thread([raw = t.get(), wp = w.get()] {
      raw->run_writer(*wp);
    });
  }
  return t;
}

TcpTransport::~TcpTransport() {
  for (auto& w : outbound_) {
    if (!w) continue;
    {
      std::lock_guard lock(w->mu);
      w->stop = true;
    }
    w->cv.notify_all();
    if (w->thread.joinable()) w->thread.join();
    ::close(w->fd);
  }
  for (int fd : inbound_) {
    if (fd >= 0) ::close(fd);
  }
}

void TcpTransport::run_writer(Writer& w) {
  for (;;) {
    Bytes frame;
    {
      std::unique_lock lock(w.mu);
      w.cv.wait(lock, [&] { return w.stop || !w.queue.empty(); });
      if (w.queue.empty()) return;
      frame = std::move(w.queue.front());
      w.queue.pop_front();
    }
    try {
      write_all(w.fd, frame.data(), frame.size());
    } catch (const TransportError&) {
      std::lock_guard lock(w.mu);
      w.failed = true;
      return;
    }
  }
}

void TcpTransport::send(PartyId to, Bytes frame) {
  if (aborted_) throw TransportError("transport aborted");
  Writer* w = outbound_[index_of(to)].get();
  if (!w) throw TransportError("no link to self");
  {
    std::lock_guard lock(w->mu);
    if (w->failed) throw TransportError("link to peer failed");
    w->queue.push_back(std::move(frame));
  }
  w->cv.notify_one();
}

Bytes TcpTransport::recv(PartyId from, std::chrono::milliseconds timeout) {
  const int fd = inbound_[index_of(from)];
  if (fd < 0) throw TransportError("no link from self");
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  Bytes frame(kFrameHeaderBytes);
  read_all(fd, frame.data(), kFrameHeaderBytes, deadline, aborted_);
  const FrameHeader h = decode_header(frame);
  frame.resize(kFrameHeaderBytes + h.payload_bytes);
  read_all(fd, frame.data() + kFrameHeaderBytes, h.payload_bytes, deadline,
           aborted_);
  return frame;
}

void TcpTransport::abort() noexcept {
  aborted_ = true;
  for (int fd : inbound_) {
    if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
  }
}

}  // namespace privswarm
