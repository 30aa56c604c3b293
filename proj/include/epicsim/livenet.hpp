#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "epicsim/core_model.hpp"

namespace epicsim {

class LiveError : public Error {
 public:
  using Error::Error;
};

struct LiveEndpoint {
  std::string address = "127.0.0.1";
  std::uint16_t port = 47'000;
  int recv_buffer = 1 << 20;
  int send_buffer = 1 << 20;
};

/// Port must be in 1024..65535 and the buffers positive.
void validate(const LiveEndpoint& endpoint);

struct EchoCounters {
  std::uint64_t pings = 0;
  std::uint64_t frames = 0;
  std::uint64_t malformed = 0;
  std::uint64_t ignored = 0;
};

/// UDP echo service: PING -> PONG with the header echoed, FRAME_FRAG -> a
/// CONTROL frame-ack carrying the frame id, malformed datagrams counted and
/// dropped. The receive-reply loop is sequential.
class EchoServer {
 public:
  /// Binds immediately; throws LiveError when the port cannot be bound.
  explicit EchoServer(const LiveEndpoint& endpoint, bool ack_frames = true);
  ~EchoServer();
  EchoServer(const EchoServer&) = delete;
  EchoServer& operator=(const EchoServer&) = delete;

  /// Blocks until stop() is called from another thread.
  void run();
  /// run() on a background thread.
  void start();
  void stop();

  std::uint16_t port() const { return port_; }
  EchoCounters counters() const;

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
  bool ack_frames_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> pings_{0};
  std::atomic<std::uint64_t> frames_{0};
  std::atomic<std::uint64_t> malformed_{0};
  std::atomic<std::uint64_t> ignored_{0};
  std::thread thread_;
};

struct ProbeResult {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::vector<Micros> rtt_samples;  // in receive order
  Micros rtt_p50 = 0;
  Micros rtt_p95 = 0;
  Micros rtt_p99 = 0;
  double loss_rate = 0.0;
  bool pass_rtt = false;
  std::vector<std::uint8_t> first_ping;  // exact wire bytes of PING #0
};

/// Sends count PINGs at interval from a sender thread while a receiver
/// thread collects PONGs; samples reach the aggregating caller through a
/// queue. Waits up to drain after the last PING. Throws on count 0, socket
/// errors, or total loss.
ProbeResult live_probe(const std::string& host, std::uint16_t port, std::uint32_t count,
                       Micros interval = 1000, std::uint32_t session_id = 1,
                       Micros drain = 500'000);

}  // namespace epicsim
