#include "epicsim/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace epicsim {

namespace {

using u128 = unsigned __int128;

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

Rational Rational::from_decimal(double value) {
  require(std::isfinite(value) && value >= 0.0, "rational: value must be finite and >= 0");
  const std::int64_t den = 10000;
  const auto num = static_cast<std::int64_t>(std::llround(value * den));
  const std::int64_t g = std::gcd(num, den);
  if (g == 0) return Rational{0, 1};
  return Rational{num / g, den / g};
}

QualityLevel::QualityLevel(int level_index, std::uint32_t width, std::uint32_t height,
                           std::uint32_t fps, Rational bpp)
    : level_index_(level_index), width_(width), height_(height), fps_(fps), bpp_(bpp) {
  require(level_index >= 0 && level_index <= 4, "quality level: index must be in 0..4");
  require(width > 0 && height > 0, "quality level: empty resolution");
  require(fps > 0, "quality level: fps must be > 0");
  require(bpp.den > 0 && bpp.num > 0, "quality level: bpp must be > 0");
}

BitsPerSecond bitrate(const QualityLevel& level) {
  const Rational bpp = level.bpp();
  const u128 bits = u128{level.pixels()} * static_cast<std::uint64_t>(bpp.num) * level.fps();
  return static_cast<BitsPerSecond>(bits / static_cast<std::uint64_t>(bpp.den));
}

std::uint64_t frame_bytes(const QualityLevel& level) {
  const Rational bpp = level.bpp();
  const u128 num = u128{level.pixels()} * static_cast<std::uint64_t>(bpp.num);
  const u128 den = u128{static_cast<std::uint64_t>(bpp.den)} * 8;
  return static_cast<std::uint64_t>((num + den - 1) / den);
}

Ladder default_ladder() {
  const Rational bpp{4, 5};
  return {
      QualityLevel(0, 1920, 1080, 60, bpp), QualityLevel(1, 1600, 900, 60, bpp),
      QualityLevel(2, 1280, 720, 60, bpp),  QualityLevel(3, 960, 540, 60, bpp),
      QualityLevel(4, 640, 360, 30, bpp),
  };
}

void validate_ladder(const Ladder& ladder) {
  require(!ladder.empty() && ladder.size() <= 5, "ladder: must have 1..5 levels");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    require(ladder[i].level_index() == static_cast<int>(i), "ladder: level indices must be 0..n-1");
    if (i == 0) continue;
    require(ladder[i].pixels() < ladder[i - 1].pixels(),
            "ladder: pixel count must strictly decrease with index");
    require(bitrate(ladder[i]) < bitrate(ladder[i - 1]),
            "ladder: bitrate must strictly decrease with index");
  }
}

std::uint64_t default_queue_capacity(std::uint64_t bandwidth, std::uint32_t mtu) {
  // 20 ms of line rate.
  const std::uint64_t bytes = bandwidth / 400;
  return std::max<std::uint64_t>(bytes, mtu);
}

NetworkProfile NetworkProfile::resolved() const {
  NetworkProfile p = *this;
  if (p.queue_capacity == 0) p.queue_capacity = default_queue_capacity(p.bandwidth, p.mtu);
  return p;
}

void validate(const NetworkProfile& profile) {
  require(profile.one_way_latency >= 0, "network profile: latency must be >= 0");
  require(profile.jitter >= 0, "network profile: jitter must be >= 0");
  require(profile.loss_rate >= 0.0 && profile.loss_rate <= 1.0,
          "network profile: loss_rate must be in [0,1]");
  require(profile.bandwidth > 0, "network profile: bandwidth must be > 0");
  require(profile.mtu >= 128, "network profile: mtu must be >= 128");
  require(profile.queue_capacity == 0 || profile.queue_capacity >= profile.mtu,
          "network profile: queue_capacity must be >= mtu");
}

void validate(const NodeSpec& node) {
  require(node.pixel_throughput > 0, "node: pixel_throughput must be > 0");
  require(node.encode_throughput > 0, "node: encode_throughput must be > 0");
  require(node.max_sessions >= 1, "node: max_sessions must be >= 1");
  if (node.egress) validate(*node.egress);
  for (const auto& [id, profile] : node.path_to_client) validate(profile);
}

void validate(const InputEvent& event) {
  require(event.timestamp >= 0, "input: negative timestamp");
  double norm2 = 0.0;
  for (float q : event.orientation) norm2 += static_cast<double>(q) * q;
  require(std::abs(std::sqrt(norm2) - 1.0) <= 1e-3, "input: orientation is not a unit quaternion");
}

void validate(const PowerProfile& profile) {
  require(profile.p_idle >= 0 && profile.p_render_local >= 0 && profile.p_radio >= 0 &&
              profile.p_decode >= 0,
          "power profile: powers must be >= 0");
  require(profile.battery_capacity > 0, "power profile: battery_capacity must be > 0");
}

}  // namespace epicsim
