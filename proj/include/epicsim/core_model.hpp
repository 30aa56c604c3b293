#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace epicsim {

/// Simulated and measured time, integer microseconds.
using Micros = std::int64_t;
using BitsPerSecond = std::uint64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for any value that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-negative rational, used for compressed bits per pixel so that frame
/// sizes and bitrates stay exact.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  /// Decimal to rational with at most 4 fractional digits (0.8 -> 4/5).
  static Rational from_decimal(double value);
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// One rung of the resolution / frame-rate / compression ladder.
/// Index 0 is the highest quality.
class QualityLevel {
 public:
  QualityLevel(int level_index, std::uint32_t width, std::uint32_t height, std::uint32_t fps,
               Rational bpp);

  int level_index() const { return level_index_; }
  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t fps() const { return fps_; }
  Rational bpp() const { return bpp_; }
  std::uint64_t pixels() const { return std::uint64_t{width_} * height_; }

  friend bool operator==(const QualityLevel&, const QualityLevel&) = default;

 private:
  int level_index_;
  std::uint32_t width_;
  std::uint32_t height_;
  std::uint32_t fps_;
  Rational bpp_;
};

using Ladder = std::vector<QualityLevel>;

/// floor(width * height * bpp * fps), bits per second.
BitsPerSecond bitrate(const QualityLevel& level);
/// ceil(width * height * bpp / 8), bytes.
std::uint64_t frame_bytes(const QualityLevel& level);

/// 1080p60 .. 360p30 at 0.8 bpp.
Ladder default_ladder();
/// Indices 0..n-1 in order, 1..5 levels, strictly decreasing pixels and bitrate.
void validate_ladder(const Ladder& ladder);

/// Emulated path characteristics. queue_capacity 0 means "use the default"
/// (20 ms worth of bandwidth), see resolved().
struct NetworkProfile {
  Micros one_way_latency = 2000;
  Micros jitter = 0;
  double loss_rate = 0.0;
  std::uint64_t bandwidth = 700'000'000;
  std::uint32_t mtu = 1400;
  std::uint64_t queue_capacity = 0;

  /// Copy with the default queue capacity filled in.
  NetworkProfile resolved() const;
  friend bool operator==(const NetworkProfile&, const NetworkProfile&) = default;
};

std::uint64_t default_queue_capacity(std::uint64_t bandwidth, std::uint32_t mtu);
void validate(const NetworkProfile& profile);

struct NodeSpec {
  std::uint32_t node_id = 0;
  std::uint64_t pixel_throughput = 0;
  std::uint64_t encode_throughput = 0;
  std::uint32_t max_sessions = 1;
  std::uint32_t active_sessions = 0;
  /// Shared downstream link in front of every client path, if any.
  std::optional<NetworkProfile> egress;
  /// client_id -> path profile from this node.
  std::map<std::uint32_t, NetworkProfile> path_to_client;
};

void validate(const NodeSpec& node);

struct InputEvent {
  Micros timestamp = 0;
  std::array<float, 3> position{};
  std::array<float, 4> orientation{0.0f, 0.0f, 0.0f, 1.0f};
  std::uint32_t buttons = 0;
  friend bool operator==(const InputEvent&, const InputEvent&) = default;
};

void validate(const InputEvent& event);

struct FrameMeta {
  std::uint32_t frame_id = 0;
  int level_index = 0;
  Micros render_time = 0;
  Micros encode_time = 0;
  std::uint64_t payload_size = 0;
  std::uint32_t checksum = 0;
  friend bool operator==(const FrameMeta&, const FrameMeta&) = default;
};

/// Defaults are plausible HMD-class numbers, not measurements.
struct PowerProfile {
  double p_idle = 3.0;
  double p_render_local = 4.5;
  double p_radio = 1.2;
  double p_decode = 0.8;
  double battery_capacity = 7.6;  // Wh
  friend bool operator==(const PowerProfile&, const PowerProfile&) = default;
};

void validate(const PowerProfile& profile);

inline constexpr Micros kRttThreshold = 7000;
inline constexpr BitsPerSecond kBandwidthThreshold = 700'000'000;
inline constexpr double kBatteryGainThreshold = 30.0;

struct KpiReport {
  Micros rtt_p50 = 0;
  Micros rtt_p95 = 0;
  Micros rtt_p99 = 0;
  Micros motion_to_photon_p95 = 0;
  BitsPerSecond aggregate_throughput = 0;
  double loss_rate = 0.0;
  double battery_gain = 0.0;  // percent
  bool pass_rtt = false;
  bool pass_bandwidth = false;
  bool pass_battery = false;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t frames_in_flight = 0;
};

}  // namespace epicsim
