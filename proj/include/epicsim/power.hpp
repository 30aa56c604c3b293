#pragma once

#include "epicsim/core_model.hpp"

namespace epicsim {

enum class RenderMode { local_render, offloaded };

struct EnergyConfig {
  RenderMode mode = RenderMode::offloaded;
  PowerProfile profile;
  QualityLevel level;
  double device_pixel_throughput = 2e8;   // px/s
  double device_decode_throughput = 7e9;  // px/s
};

void validate(const EnergyConfig& cfg);

/// Fraction of wall time the device spends rendering (local) or decoding
/// (offloaded), capped at 1.
double utilization(const EnergyConfig& cfg);

/// Mean device power in watts.
///   local:     p_idle + p_render_local * u_render
///   offloaded: p_idle + p_radio + p_decode * u_decode
double average_power(const EnergyConfig& cfg);

/// Hours of operation on a full battery.
double battery_life_hours(const EnergyConfig& cfg);

/// (P_local / P_offloaded - 1) * 100. Battery capacities must match.
double battery_life_gain(const EnergyConfig& local, const EnergyConfig& offloaded);

}  // namespace epicsim
