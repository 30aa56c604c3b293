#include "epicsim/renderfarm.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <mutex>
#include <string>

#include "epicsim/crc32.hpp"
#include "epicsim/rng.hpp"

namespace epicsim {

namespace {

using u128 = unsigned __int128;

Micros ceil_div(u128 num, u128 den) { return static_cast<Micros>((num + den - 1) / den); }

}  // namespace

Micros render_time(std::uint64_t pixels, double scene_complexity, std::uint64_t pixel_throughput) {
  if (!(scene_complexity >= 0.1)) throw ValidationError("render: scene_complexity must be >= 0.1");
  if (pixel_throughput == 0) throw ValidationError("render: pixel_throughput must be > 0");
  const auto micro_units = static_cast<std::uint64_t>(std::llround(scene_complexity * 1e6));
  return ceil_div(u128{micro_units} * pixels, pixel_throughput);
}

Micros codec_time(std::uint64_t pixels, std::uint64_t throughput) {
  if (throughput == 0) throw ValidationError("codec: throughput must be > 0");
  return ceil_div(u128{pixels} * 1'000'000, throughput);
}

std::vector<std::uint8_t> synth_payload(std::uint32_t frame_id, std::uint32_t session_id,
                                        std::uint64_t seed, std::size_t size) {
  std::vector<std::uint8_t> out(size);
  SplitMix64 rng(mix_seed(seed, session_id, frame_id));
  std::size_t i = 0;
  for (; i + 8 <= size; i += 8) {
    const std::uint64_t v = rng.next();
    std::memcpy(out.data() + i, &v, 8);
  }
  if (i < size) {
    const std::uint64_t v = rng.next();
    std::memcpy(out.data() + i, &v, size - i);
  }
  return out;
}

RenderedFrame render(const RenderRequest& req, const NodeSpec& node, std::uint64_t seed) {
  if (node.active_sessions > node.max_sessions) {
    throw CapacityError("render: node " + std::to_string(node.node_id) + " over capacity (" +
                        std::to_string(node.active_sessions) + " > " +
                        std::to_string(node.max_sessions) + ")");
  }
  const std::uint64_t pixels = req.level.pixels();
  auto bytes = std::make_shared<std::vector<std::uint8_t>>(
      synth_payload(req.frame_id, req.session_id, seed, frame_bytes(req.level)));

  RenderedFrame out;
  out.meta.frame_id = req.frame_id;
  out.meta.level_index = req.level.level_index();
  out.meta.render_time = render_time(pixels, req.scene_complexity, node.pixel_throughput);
  out.meta.encode_time = codec_time(pixels, node.encode_throughput);
  out.meta.payload_size = bytes->size();
  out.meta.checksum = crc32(*bytes);
  out.payload = std::move(bytes);
  return out;
}

Micros decode_check(const FrameMeta& meta, std::span<const std::uint8_t> payload,
                    const QualityLevel& level, std::uint64_t client_decode_throughput) {
  if (meta.level_index != level.level_index()) {
    throw IntegrityError("decode: frame level does not match the ladder entry");
  }
  if (payload.size() != meta.payload_size) {
    throw IntegrityError("decode: length mismatch for frame " + std::to_string(meta.frame_id) +
                         " (" + std::to_string(payload.size()) + " != " +
                         std::to_string(meta.payload_size) + ")");
  }
  if (crc32(payload) != meta.checksum) {
    throw IntegrityError("decode: checksum mismatch for frame " + std::to_string(meta.frame_id));
  }
  return codec_time(level.pixels(), client_decode_throughput);
}

std::optional<RenderedFrame> FrameCache::lookup(std::uint32_t session_id, std::uint32_t frame_id,
                                                int level_index) const {
  std::shared_lock lock(mutex_);
  const auto it = entries_.find({session_id, frame_id, level_index});
  if (it == entries_.end()) return std::nullopt;
  hits_.fetch_add(1, std::memory_order_relaxed);
  return it->second;
}

void FrameCache::insert(std::uint32_t session_id, const RenderedFrame& frame) {
  std::unique_lock lock(mutex_);
  entries_[{session_id, frame.meta.frame_id, frame.meta.level_index}] = frame;
}

void FrameCache::evict_before(std::uint32_t session_id, std::uint32_t floor) {
  std::unique_lock lock(mutex_);
  auto it = entries_.lower_bound({session_id, 0, 0});
  const auto end = entries_.lower_bound({session_id, floor, 0});
  entries_.erase(it, end);
}

std::size_t FrameCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::uint64_t FrameCache::hits() const {
  return hits_.load(std::memory_order_relaxed);
}

}  // namespace epicsim
