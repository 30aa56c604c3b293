#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <tuple>
#include <vector>

#include "epicsim/core_model.hpp"

namespace epicsim {

using Payload = std::shared_ptr<const std::vector<std::uint8_t>>;

struct RenderRequest {
  std::uint32_t frame_id = 0;
  QualityLevel level;
  double scene_complexity = 1.0;
  std::uint32_t session_id = 0;
};

struct RenderedFrame {
  FrameMeta meta;
  Payload payload;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// ceil(complexity * pixels / throughput * 10^6). Complexity is taken to 1e-6.
Micros render_time(std::uint64_t pixels, double scene_complexity, std::uint64_t pixel_throughput);
/// ceil(pixels / throughput * 10^6); used for both encode and decode.
Micros codec_time(std::uint64_t pixels, std::uint64_t throughput);

/// Deterministic frame bytes from a SplitMix64 stream keyed by (seed, session, frame).
std::vector<std::uint8_t> synth_payload(std::uint32_t frame_id, std::uint32_t session_id,
                                        std::uint64_t seed, std::size_t size);

/// Synthetic edge render + parametric encode. Throws CapacityError when the
/// node already carries more than max_sessions sessions.
RenderedFrame render(const RenderRequest& req, const NodeSpec& node, std::uint64_t seed);

/// Verifies length and CRC-32, returns the modeled decode time for the
/// frame's ladder level. Throws IntegrityError on any mismatch.
Micros decode_check(const FrameMeta& meta, std::span<const std::uint8_t> payload,
                    const QualityLevel& level, std::uint64_t client_decode_throughput);

/// Encoded-frame cache keyed by (session, frame, level). Safe for concurrent
/// lookups and inserts; last write wins.
class FrameCache {
 public:
  std::optional<RenderedFrame> lookup(std::uint32_t session_id, std::uint32_t frame_id,
                                      int level_index) const;
  void insert(std::uint32_t session_id, const RenderedFrame& frame);
  /// Drops every entry of the session with frame_id < floor.
  void evict_before(std::uint32_t session_id, std::uint32_t floor);
  std::size_t size() const;
  std::uint64_t hits() const;

 private:
  using Key = std::tuple<std::uint32_t, std::uint32_t, int>;
  mutable std::shared_mutex mutex_;
  std::map<Key, RenderedFrame> entries_;
  mutable std::atomic<std::uint64_t> hits_{0};
};

}  // namespace epicsim
