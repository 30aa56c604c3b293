#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "epicsim/core_model.hpp"
#include "epicsim/rng.hpp"

namespace epicsim {

struct Packet {
  std::vector<std::uint8_t> bytes;
  Micros submit_time = 0;

  std::size_t size() const { return bytes.size(); }
  friend bool operator==(const Packet&, const Packet&) = default;
};

enum class SubmitOutcome { scheduled, dropped_loss, dropped_queue };

struct SubmitResult {
  SubmitOutcome outcome = SubmitOutcome::scheduled;
  Micros delivery_time = 0;  // valid when scheduled
};

struct Delivery {
  Packet packet;
  Micros arrival = 0;
  friend bool operator==(const Delivery&, const Delivery&) = default;
};

struct PathCounters {
  std::uint64_t submitted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_loss = 0;
  std::uint64_t dropped_queue = 0;
  friend bool operator==(const PathCounters&, const PathCounters&) = default;
};

/// ceil(size * 8 * 10^6 / bandwidth), at least 1 us.
Micros serialization_time(std::uint64_t size, std::uint64_t bandwidth);

/// One emulated network path: Bernoulli loss, byte-bounded drop-tail queue in
/// front of a serializer, fixed propagation latency plus uniform jitter.
/// Deliveries are FIFO; jittered arrival times are clamped to be monotone.
///
/// RNG consumption per submit: one draw for the loss decision, plus one
/// jitter draw when the packet is accepted and jitter > 0.
class NetemPath {
 public:
  NetemPath(const NetworkProfile& profile, std::uint64_t seed);

  SubmitResult submit(Packet packet, Micros now);

  /// Pops every delivery with arrival <= t, in arrival order.
  std::vector<Delivery> advance_to(Micros t);

  std::optional<Micros> next_delivery() const;

  /// Bandwidth change applies to packets submitted afterwards.
  void set_bandwidth(std::uint64_t bandwidth);

  const NetworkProfile& profile() const { return profile_; }
  const PathCounters& counters() const { return counters_; }
  std::uint64_t in_flight() const { return pending_.size(); }
  std::uint64_t queued_bytes() const { return queued_bytes_; }
  Micros busy_until() const { return busy_until_; }

  friend bool operator==(const NetemPath&, const NetemPath&) = default;

 private:
  struct Serializing {
    Micros end;
    std::uint64_t size;
    friend bool operator==(const Serializing&, const Serializing&) = default;
  };

  void release_serialized(Micros now);

  NetworkProfile profile_;
  SplitMix64 rng_;
  Micros busy_until_ = 0;
  Micros last_submit_ = 0;
  Micros last_advance_ = 0;
  Micros last_delivery_ = 0;
  std::uint64_t queued_bytes_ = 0;
  std::deque<Serializing> serializing_;
  std::deque<Delivery> pending_;
  PathCounters counters_;
};

}  // namespace epicsim
