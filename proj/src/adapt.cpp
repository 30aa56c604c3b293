#include "epicsim/adapt.hpp"

#include <algorithm>

namespace epicsim {

void validate(const ControllerParams& p) {
  if (p.rtt_budget <= 0) throw ValidationError("controller: rtt_budget must be > 0");
  if (p.loss_threshold < 0 || p.loss_threshold > 1) {
    throw ValidationError("controller: loss_threshold must be in [0,1]");
  }
  if (p.throughput_factor < 0) throw ValidationError("controller: throughput_factor must be >= 0");
  if (p.k_down < 1 || p.k_up < 1) throw ValidationError("controller: k_down and k_up must be >= 1");
  if (p.cooldown < 0) throw ValidationError("controller: cooldown must be >= 0");
  if (p.window <= 0) throw ValidationError("controller: window must be > 0");
}

std::string BottleneckVerdict::cause() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(rtt, "rtt");
  add(loss, "loss");
  add(throughput, "throughput");
  return out.empty() ? "none" : out;
}

BottleneckVerdict detect_bottleneck(const WindowStats& w, BitsPerSecond level_bitrate,
                                    const ControllerParams& params) {
  BottleneckVerdict v;
  v.rtt = w.srtt > params.rtt_budget;
  v.loss = w.frame_loss_rate > params.loss_threshold;
  v.throughput = static_cast<double>(w.delivered_throughput) <
                 params.throughput_factor * static_cast<double>(level_bitrate);
  return v;
}

bool detect_bottleneck(const WindowStats& w, Micros rtt_budget, const Ladder& ladder) {
  ControllerParams p;
  p.rtt_budget = rtt_budget;
  return static_cast<bool>(detect_bottleneck(w, bitrate(ladder.at(w.current_level)), p));
}

ControllerState controller_step(const ControllerState& s, bool bottleneck,
                                const ControllerParams& params, int ladder_size,
                                bool upgrade_allowed) {
  ControllerState n = s;
  // Saturating counters; only the thresholds matter.
  if (bottleneck) {
    n.consecutive_bad = std::min(n.consecutive_bad + 1, params.k_down);
    n.consecutive_good = 0;
  } else {
    n.consecutive_good = std::min(n.consecutive_good + 1, params.k_up);
    n.consecutive_bad = 0;
  }
  if (n.cooldown_remaining > 0) {
    --n.cooldown_remaining;
    return n;
  }
  const int bottom = ladder_size - 1;
  int target = n.level;
  if (n.consecutive_bad >= params.k_down && n.level < bottom) {
    target = n.level + 1;
  } else if (n.consecutive_good >= params.k_up && n.level > 0 && upgrade_allowed) {
    target = n.level - 1;
  }
  if (target != n.level) {
    n.level = target;
    n.consecutive_bad = 0;
    n.consecutive_good = 0;
    n.cooldown_remaining = params.cooldown;
  }
  return n;
}

}  // namespace epicsim
