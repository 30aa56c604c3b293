#include "epicsim/netem.hpp"

#include <algorithm>
#include <string>

namespace epicsim {

Micros serialization_time(std::uint64_t size, std::uint64_t bandwidth) {
  using u128 = unsigned __int128;
  const u128 bits = u128{size} * 8 * 1'000'000;
  const auto us = static_cast<Micros>((bits + bandwidth - 1) / bandwidth);
  return std::max<Micros>(us, 1);
}

NetemPath::NetemPath(const NetworkProfile& profile, std::uint64_t seed)
    : profile_(profile.resolved()), rng_(seed) {
  validate(profile_);
}

void NetemPath::release_serialized(Micros now) {
  while (!serializing_.empty() && serializing_.front().end <= now) {
    queued_bytes_ -= serializing_.front().size;
    serializing_.pop_front();
  }
}

SubmitResult NetemPath::submit(Packet packet, Micros now) {
  if (packet.size() > profile_.mtu) {
    throw ValidationError("netem: packet of " + std::to_string(packet.size()) +
                          " B exceeds mtu " + std::to_string(profile_.mtu));
  }
  if (now < last_submit_) throw ValidationError("netem: submit time went backwards");
  last_submit_ = now;
  packet.submit_time = now;
  ++counters_.submitted;

  if (rng_.next_fraction() < profile_.loss_rate) {
    ++counters_.dropped_loss;
    return {SubmitOutcome::dropped_loss, 0};
  }

  release_serialized(now);
  const std::uint64_t size = packet.size();
  if (queued_bytes_ + size > profile_.queue_capacity) {
    ++counters_.dropped_queue;
    return {SubmitOutcome::dropped_queue, 0};
  }

  const Micros start = std::max(now, busy_until_);
  busy_until_ = start + serialization_time(size, profile_.bandwidth);
  queued_bytes_ += size;
  serializing_.push_back({busy_until_, size});

  Micros jitter = 0;
  if (profile_.jitter > 0) {
    jitter = static_cast<Micros>(rng_.next_at_most(static_cast<std::uint64_t>(profile_.jitter)));
  }
  const Micros arrival =
      std::max(busy_until_ + profile_.one_way_latency + jitter, last_delivery_);
  last_delivery_ = arrival;
  pending_.push_back({std::move(packet), arrival});
  return {SubmitOutcome::scheduled, arrival};
}

std::vector<Delivery> NetemPath::advance_to(Micros t) {
  if (t < last_advance_) throw ValidationError("netem: advance time went backwards");
  last_advance_ = t;
  std::vector<Delivery> out;
  while (!pending_.empty() && pending_.front().arrival <= t) {
    out.push_back(std::move(pending_.front()));
    pending_.pop_front();
  }
  counters_.delivered += out.size();
  return out;
}

std::optional<Micros> NetemPath::next_delivery() const {
  if (pending_.empty()) return std::nullopt;
  return pending_.front().arrival;
}

void NetemPath::set_bandwidth(std::uint64_t bandwidth) {
  if (bandwidth == 0) throw ValidationError("netem: bandwidth must be > 0");
  profile_.bandwidth = bandwidth;
}

}  // namespace epicsim
