#include "epicsim/livenet.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <optional>
#include <unordered_set>

#include "epicsim/kpi.hpp"
#include "epicsim/transport.hpp"

namespace epicsim {

namespace {

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

std::int64_t steady_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (const int rc = getaddrinfo(host.c_str(), nullptr, &hints, &res); rc != 0 || res == nullptr) {
    throw LiveError("cannot resolve " + host + ": " + gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof addr);
  freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

class Socket {
 public:
  Socket() : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
    if (fd_ < 0) throw LiveError(sys_error("socket"));
  }
  ~Socket() {
    if (fd_ >= 0) ::close(fd_);
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  int release() { return std::exchange(fd_, -1); }
  int fd() const { return fd_; }

 private:
  int fd_;
};

void set_buffers(int fd, int recv, int send) {
  ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &recv, sizeof recv);
  ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &send, sizeof send);
}

// Waits for readability up to timeout_ms. False on timeout.
bool readable(int fd, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  const int rc = ::poll(&p, 1, timeout_ms);
  if (rc < 0 && errno != EINTR) throw LiveError(sys_error("poll"));
  return rc > 0;
}

}  // namespace

void validate(const LiveEndpoint& endpoint) {
  if (endpoint.port < 1024) throw ValidationError("endpoint: port must be in 1024..65535");
  if (endpoint.recv_buffer <= 0 || endpoint.send_buffer <= 0) {
    throw ValidationError("endpoint: buffer sizes must be > 0");
  }
}

EchoServer::EchoServer(const LiveEndpoint& endpoint, bool ack_frames) : ack_frames_(ack_frames) {
  validate(endpoint);
  Socket sock;
  const int one = 1;
  ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  set_buffers(sock.fd(), endpoint.recv_buffer, endpoint.send_buffer);
  const sockaddr_in addr = resolve(endpoint.address, endpoint.port);
  if (::bind(sock.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw LiveError(sys_error("bind " + endpoint.address + ":" + std::to_string(endpoint.port)));
  }
  port_ = endpoint.port;
  fd_ = sock.release();
}

EchoServer::~EchoServer() {
  stop();
  if (fd_ >= 0) ::close(fd_);
}

void EchoServer::run() {
  std::vector<std::uint8_t> buf(65'536);
  while (!stop_.load()) {
    if (!readable(fd_, 50)) continue;
    sockaddr_in peer{};
    socklen_t peer_len = sizeof peer;
    const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&peer),
                                 &peer_len);
    if (n < 0) {
      // ICMP errors from departed peers surface here; keep serving.
      continue;
    }
    Message msg;
    try {
      msg = decode_message(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
    } catch (const DecodeError&) {
      malformed_.fetch_add(1);
      continue;
    }

    std::vector<std::uint8_t> reply;
    if (msg.header.type == MsgType::ping) {
      pings_.fetch_add(1);
      WireHeader h = msg.header;
      h.type = MsgType::pong;
      reply = encode_message(h, {});
    } else if (msg.header.type == MsgType::frame_frag) {
      FrameFragment frag;
      try {
        frag = decode_fragment(msg);
      } catch (const DecodeError&) {
        malformed_.fetch_add(1);
        continue;
      }
      frames_.fetch_add(1);
      if (!ack_frames_) continue;
      WireHeader h = msg.header;
      h.type = MsgType::control;
      reply = encode_message(h, encode_control({ControlSubtype::frame_ack, frag.frame_id}));
    } else {
      ignored_.fetch_add(1);
      continue;
    }
    ::sendto(fd_, reply.data(), reply.size(), 0, reinterpret_cast<const sockaddr*>(&peer), peer_len);
  }
}

void EchoServer::start() {
  if (thread_.joinable()) return;
  stop_.store(false);
  thread_ = std::thread([this] { run(); });
}

void EchoServer::stop() {
  stop_.store(true);
  if (thread_.joinable()) thread_.join();
}

EchoCounters EchoServer::counters() const {
  return {pings_.load(), frames_.load(), malformed_.load(), ignored_.load()};
}

ProbeResult live_probe(const std::string& host, std::uint16_t port, std::uint32_t count,
                       Micros interval, std::uint32_t session_id, Micros drain) {
  if (count == 0) throw ValidationError("live_probe: count must be > 0");
  if (interval < 0 || drain < 0) throw ValidationError("live_probe: negative interval or drain");
  if (port < 1024) throw ValidationError("live_probe: port must be in 1024..65535");

  Socket sock;
  set_buffers(sock.fd(), 1 << 20, 1 << 20);
  const sockaddr_in addr = resolve(host, port);
  if (::connect(sock.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    throw LiveError(sys_error("connect"));
  }

  // Receiver -> aggregator queue. nullopt marks the end of the stream.
  struct Sample {
    std::uint32_t sequence;
    Micros rtt;
  };
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::optional<Sample>> queue;
  auto push = [&](std::optional<Sample> s) {
    {
      std::lock_guard lock(mu);
      queue.push_back(s);
    }
    cv.notify_one();
  };

  std::atomic<bool> sender_done{false};
  std::atomic<std::int64_t> last_send_ns{0};
  std::string send_error;
  ProbeResult result;

  std::thread sender([&] {
    const std::int64_t begin = steady_ns();
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::int64_t due = begin + static_cast<std::int64_t>(i) * interval * 1000;
      while (steady_ns() < due) std::this_thread::sleep_for(std::chrono::microseconds(50));
      const std::int64_t now = steady_ns();
      const WireHeader h{MsgType::ping, 0, session_id, i, static_cast<std::uint64_t>(now / 1000)};
      const auto bytes = encode_message(h, {});
      if (i == 0) result.first_ping = bytes;
      if (::send(sock.fd(), bytes.data(), bytes.size(), 0) < 0 && errno != ECONNREFUSED) {
        send_error = sys_error("send");
        break;
      }
      last_send_ns.store(steady_ns());
    }
    sender_done.store(true);
  });

  std::thread receiver([&] {
    std::unordered_set<std::uint32_t> seen;
    std::vector<std::uint8_t> buf(2048);
    while (true) {
      if (sender_done.load()) {
        if (seen.size() == count) break;
        if (steady_ns() - last_send_ns.load() > drain * 1000) break;
      }
      if (!readable(sock.fd(), 20)) continue;
      const ssize_t n = ::recv(sock.fd(), buf.data(), buf.size(), 0);
      const std::int64_t now_ns = steady_ns();
      if (n < 0) continue;  // ICMP refusals surface here; treated as loss
      Message msg;
      try {
        msg = decode_message(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
      } catch (const DecodeError&) {
        continue;
      }
      if (msg.header.type != MsgType::pong || msg.header.session_id != session_id) continue;
      if (msg.header.sequence >= count || !seen.insert(msg.header.sequence).second) continue;
      const Micros receive_us = (now_ns + 999) / 1000;
      push(Sample{msg.header.sequence, receive_us - static_cast<Micros>(msg.header.timestamp)});
    }
    push(std::nullopt);
  });

  while (true) {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return !queue.empty(); });
    const auto item = queue.front();
    queue.pop_front();
    lock.unlock();
    if (!item) break;
    result.rtt_samples.push_back(item->rtt);
  }
  sender.join();
  receiver.join();
  if (!send_error.empty()) throw LiveError(send_error);

  result.sent = count;
  result.received = result.rtt_samples.size();
  if (result.received == 0) throw LiveError("live_probe: no PONG received (total loss)");
  result.loss_rate = 1.0 - static_cast<double>(result.received) / static_cast<double>(result.sent);
  result.rtt_p50 = percentile(result.rtt_samples, 50);
  result.rtt_p95 = percentile(result.rtt_samples, 95);
  result.rtt_p99 = percentile(result.rtt_samples, 99);
  result.pass_rtt = result.rtt_p95 > 0 && result.rtt_p95 < kRttThreshold;
  return result;
}

}  // namespace epicsim
