#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <memory>
#include <optional>

#include "epicsim/livenet.hpp"
#include "epicsim/transport.hpp"
#include "oracles.hpp"

using namespace epicsim;

namespace {

// Binds an echo server on the first free port of a pid-dependent range.
std::unique_ptr<EchoServer> start_echo(bool ack_frames = true) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    LiveEndpoint ep;
    ep.port = static_cast<std::uint16_t>(20'000 + (::getpid() * 7 + attempt * 131) % 40'000);
    try {
      auto server = std::make_unique<EchoServer>(ep, ack_frames);
      server->start();
      return server;
    } catch (const LiveError&) {
    }
  }
  throw std::runtime_error("no free port");
}

class UdpClient {
 public:
  explicit UdpClient(std::uint16_t port) : fd_(::socket(AF_INET, SOCK_DGRAM, 0)) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
  }
  ~UdpClient() { ::close(fd_); }
  void send(const std::vector<std::uint8_t>& bytes) { ::send(fd_, bytes.data(), bytes.size(), 0); }
  std::optional<std::vector<std::uint8_t>> recv(int timeout_ms = 500) {
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, timeout_ms) <= 0) return std::nullopt;
    std::vector<std::uint8_t> buf(2048);
    const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0) return std::nullopt;
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }

 private:
  int fd_;
};

}  // namespace

TEST(LiveEndpoint, Validation) {
  LiveEndpoint ep;
  EXPECT_NO_THROW(validate(ep));
  ep.port = 80;
  EXPECT_THROW(validate(ep), ValidationError);
  ep = {};
  ep.recv_buffer = 0;
  EXPECT_THROW(validate(ep), ValidationError);
}

TEST(EchoServer, PingGetsPongWithSameFields) {
  auto server = start_echo();
  UdpClient c(server->port());
  const WireHeader ping{MsgType::ping, 0, 9, 42, 123'456'789};
  c.send(encode_message(ping, {}));
  const auto reply = c.recv();
  ASSERT_TRUE(reply);
  const Message m = decode_message(*reply);
  EXPECT_EQ(m.header.type, MsgType::pong);
  EXPECT_EQ(m.header.session_id, 9u);
  EXPECT_EQ(m.header.sequence, 42u);
  EXPECT_EQ(m.header.timestamp, 123'456'789u);
  server->stop();
  EXPECT_EQ(server->counters().pings, 1u);
}

TEST(EchoServer, MalformedDatagramIsCountedAndDropped) {
  auto server = start_echo();
  UdpClient c(server->port());
  auto bad = encode_message({MsgType::ping, 0, 1, 1, 1}, {});
  bad[0] = 'X';
  c.send(bad);
  EXPECT_FALSE(c.recv(200));
  server->stop();
  EXPECT_EQ(server->counters().malformed, 1u);
  EXPECT_EQ(server->counters().pings, 0u);
}

TEST(EchoServer, FrameFragmentIsAcked) {
  auto server = start_echo();
  UdpClient c(server->port());
  const auto frags = fragment(77, std::vector<std::uint8_t>(500, 1), 1400, {MsgType::frame_frag, 0, 3, 1, 5});
  c.send(encode_fragment(frags[0]));
  const auto reply = c.recv();
  ASSERT_TRUE(reply);
  EXPECT_EQ(reply->size(), 32u);
  const Message m = decode_message(*reply);
  EXPECT_EQ(m.header.type, MsgType::control);
  const ControlBody body = decode_control(m.payload);
  EXPECT_EQ(body.subtype, ControlSubtype::frame_ack);
  EXPECT_EQ(body.argument, 77u);
  server->stop();
  EXPECT_EQ(server->counters().frames, 1u);
}

TEST(EchoServer, FrameAckCanBeDisabled) {
  auto server = start_echo(false);
  UdpClient c(server->port());
  const auto frags = fragment(1, std::vector<std::uint8_t>(10, 1), 1400);
  c.send(encode_fragment(frags[0]));
  EXPECT_FALSE(c.recv(200));
  server->stop();
}

TEST(LiveProbe, LoopbackThousandPings) {
  auto server = start_echo();
  const ProbeResult r = live_probe("127.0.0.1", server->port(), 1000, 200);
  server->stop();
  EXPECT_EQ(r.sent, 1000u);
  EXPECT_GE(r.received, 999u);
  EXPECT_LE(r.loss_rate, 0.001);
  ASSERT_EQ(r.rtt_samples.size(), r.received);
  for (Micros s : r.rtt_samples) EXPECT_GT(s, 0);
  EXPECT_GT(r.rtt_p95, 0);
  EXPECT_LE(r.rtt_p50, r.rtt_p95);
  EXPECT_LE(r.rtt_p95, r.rtt_p99);
  ASSERT_EQ(r.first_ping.size(), 24u);
  std::uint64_t ts = 0;
  for (std::size_t i = 16; i < 24; ++i) ts = ts << 8 | r.first_ping[i];
  EXPECT_EQ(r.first_ping, oracle::reference_header(0x03, 0, 1, 0, ts));
}

TEST(LiveProbe, Errors) {
  EXPECT_THROW(live_probe("127.0.0.1", 47'001, 0), ValidationError);
  // Nothing listens on this port: every PING is lost.
  auto server = start_echo();
  const std::uint16_t port = server->port();
  server.reset();
  EXPECT_THROW(live_probe("127.0.0.1", port, 5, 1000, 1, 100'000), LiveError);
}
