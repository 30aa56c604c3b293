#include "epicsim/power.hpp"

#include <algorithm>

namespace epicsim {

void validate(const EnergyConfig& cfg) {
  validate(cfg.profile);
  if (!(cfg.device_pixel_throughput > 0) || !(cfg.device_decode_throughput > 0)) {
    throw ValidationError("energy config: throughputs must be > 0");
  }
}

double utilization(const EnergyConfig& cfg) {
  validate(cfg);
  const double pixels = static_cast<double>(cfg.level.pixels());
  const double per_frame = cfg.mode == RenderMode::local_render
                               ? pixels / cfg.device_pixel_throughput
                               : pixels / cfg.device_decode_throughput;
  return std::min(1.0, per_frame * cfg.level.fps());
}

double average_power(const EnergyConfig& cfg) {
  const double u = utilization(cfg);
  const PowerProfile& p = cfg.profile;
  if (cfg.mode == RenderMode::local_render) return p.p_idle + p.p_render_local * u;
  return p.p_idle + p.p_radio + p.p_decode * u;
}

double battery_life_hours(const EnergyConfig& cfg) {
  const double watts = average_power(cfg);
  if (watts <= 0) throw ValidationError("energy: zero power draw");
  return cfg.profile.battery_capacity / watts;
}

double battery_life_gain(const EnergyConfig& local, const EnergyConfig& offloaded) {
  if (local.profile.battery_capacity != offloaded.profile.battery_capacity) {
    throw ValidationError("battery gain: configs must share battery_capacity");
  }
  const double p_off = average_power(offloaded);
  if (p_off <= 0) throw ValidationError("battery gain: offloaded power is zero");
  return (average_power(local) / p_off - 1.0) * 100.0;
}

}  // namespace epicsim
