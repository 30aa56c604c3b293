#pragma once

#include <cstdint>
#include <string>

#include "epicsim/core_model.hpp"

namespace epicsim {

/// Per-window measurements seen by the bottleneck detector.
struct WindowStats {
  std::uint64_t window_index = 0;
  Micros srtt = 0;  // 0 when no RTT sample exists yet
  double frame_loss_rate = 0.0;
  BitsPerSecond delivered_throughput = 0;
  int current_level = 0;
};

struct ControllerParams {
  Micros rtt_budget = kRttThreshold;
  double loss_threshold = 0.02;
  double throughput_factor = 0.9;
  int k_down = 2;
  int k_up = 12;
  int cooldown = 4;
  Micros window = 250'000;
  /// Hold upgrades unless the measured path capacity covers the next level.
  bool capacity_gate = true;
};

void validate(const ControllerParams& params);

/// Which predicates fired.
struct BottleneckVerdict {
  bool rtt = false;
  bool loss = false;
  bool throughput = false;

  explicit operator bool() const { return rtt || loss || throughput; }
  std::string cause() const;
};

BottleneckVerdict detect_bottleneck(const WindowStats& w, BitsPerSecond level_bitrate,
                                    const ControllerParams& params);

/// Uses the default loss and throughput thresholds.
bool detect_bottleneck(const WindowStats& w, Micros rtt_budget, const Ladder& ladder);

struct ControllerState {
  int level = 0;
  int consecutive_bad = 0;
  int consecutive_good = 0;
  int cooldown_remaining = 0;
  friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

/// One window of the hysteresis state machine. Level moves by at most one.
/// upgrade_allowed gates only the upward move.
ControllerState controller_step(const ControllerState& s, bool bottleneck,
                                const ControllerParams& params, int ladder_size,
                                bool upgrade_allowed = true);

}  // namespace epicsim
