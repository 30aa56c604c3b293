#include "epicsim/kpi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace epicsim {

Micros percentile(std::span<const Micros> samples, double p) {
  if (samples.empty()) throw ValidationError("percentile: empty samples");
  if (!(p > 0.0 && p <= 100.0)) throw ValidationError("percentile: p must be in (0, 100]");
  std::vector<Micros> sorted(samples.begin(), samples.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
  return sorted[rank - 1];
}

bool rtt_verdict(const KpiReport& r) { return r.rtt_p95 > 0 && r.rtt_p95 < kRttThreshold; }
bool bandwidth_verdict(const KpiReport& r) { return r.aggregate_throughput > kBandwidthThreshold; }
bool battery_verdict(const KpiReport& r) { return r.battery_gain > kBatteryGainThreshold; }

KpiReport build_report(const RunTrace& trace, double battery_gain) {
  if (trace.duration <= 0) throw ValidationError("report: trace has no duration");
  if (trace.frames_sent == 0 && trace.rtt_samples.empty()) {
    throw ValidationError("report: empty trace");
  }
  KpiReport r;
  if (!trace.rtt_samples.empty()) {
    r.rtt_p50 = percentile(trace.rtt_samples, 50);
    r.rtt_p95 = percentile(trace.rtt_samples, 95);
    r.rtt_p99 = percentile(trace.rtt_samples, 99);
  }
  if (!trace.motion_to_photon.empty()) {
    r.motion_to_photon_p95 = percentile(trace.motion_to_photon, 95);
  }
  unsigned __int128 bits = 0;
  for (const auto& client : trace.delivered_bits) {
    bits = std::accumulate(client.begin(), client.end(), bits);
  }
  r.aggregate_throughput =
      static_cast<BitsPerSecond>(bits * 1'000'000 / static_cast<std::uint64_t>(trace.duration));
  r.frames_sent = trace.frames_sent;
  r.frames_delivered = trace.frames_delivered;
  r.frames_dropped = trace.frames_dropped;
  r.frames_in_flight = trace.frames_in_flight;
  const std::uint64_t resolved = r.frames_delivered + r.frames_dropped;
  r.loss_rate = resolved == 0 ? 0.0
                              : static_cast<double>(r.frames_dropped) / static_cast<double>(resolved);
  r.battery_gain = battery_gain;
  r.pass_rtt = rtt_verdict(r);
  r.pass_bandwidth = bandwidth_verdict(r);
  r.pass_battery = battery_verdict(r);
  return r;
}

int load_search(const std::function<bool(int)>& predicate, int n_max) {
  if (n_max < 1) throw ValidationError("load search: n_max must be >= 1");
  int best = 0;
  for (int n = 1; n <= n_max; ++n) {
    if (!predicate(n)) break;
    best = n;
  }
  return best;
}

std::optional<int> stress_search(const std::function<bool(int)>& congested, int n_max) {
  if (n_max < 1) throw ValidationError("stress search: n_max must be >= 1");
  for (int n = 1; n <= n_max; ++n) {
    if (congested(n)) return n;
  }
  return std::nullopt;
}

}  // namespace epicsim
