#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epicsim/core_model.hpp"

namespace epicsim {

struct LevelChange {
  Micros time = 0;
  std::uint32_t client_id = 0;
  std::uint64_t window_index = 0;
  int from = 0;
  int to = 0;
  std::string cause;
};

/// Everything the KPI report is computed from.
struct RunTrace {
  Micros duration = 0;
  std::vector<Micros> rtt_samples;
  std::vector<Micros> motion_to_photon;
  /// [client][second] -> delivered frame payload bits.
  std::vector<std::vector<std::uint64_t>> delivered_bits;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t frames_in_flight = 0;
  std::uint64_t packets_dropped_loss = 0;
  std::uint64_t packets_dropped_queue = 0;
  /// Queue drops seen at the 75% mark and at the end of the run.
  std::uint64_t queue_drops_at_mark = 0;
  std::uint64_t queue_drops_at_end = 0;
  std::vector<LevelChange> level_timeline;
};

/// Nearest-rank percentile: ascending sort, element ceil(p/100 * n) - 1.
Micros percentile(std::span<const Micros> samples, double p);

KpiReport build_report(const RunTrace& trace, double battery_gain);

/// KPI verdicts as pure threshold functions of the report fields.
bool rtt_verdict(const KpiReport& r);
bool bandwidth_verdict(const KpiReport& r);
bool battery_verdict(const KpiReport& r);

/// Largest N in 1..n_max with predicate(N) true, scanning upward and
/// stopping at the first failure. Returns 0 when predicate(1) is false.
int load_search(const std::function<bool(int)>& predicate, int n_max);

/// Smallest N in 1..n_max with congested(N), or nullopt.
std::optional<int> stress_search(const std::function<bool(int)>& congested, int n_max);

}  // namespace epicsim
