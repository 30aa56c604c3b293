#pragma once

#include <string>
#include <utility>
#include <vector>

#include "epicsim/orchestrator.hpp"

namespace epicsim {

/// Fixed key order, integers for every count and time, exactly four
/// fractional digits for battery_gain and loss_rate. Ends with a newline.
std::string report_json(const ScenarioConfig& cfg, const ScenarioRun& run);

std::string sweep_json(const ScenarioConfig& cfg, const std::string& param_path,
                       const std::vector<std::pair<double, ScenarioRun>>& rows);

/// Plain-text table: value, rtt p50/p95/p99, motion-to-photon p95, throughput, loss.
std::string sweep_table(const std::string& param_path,
                        const std::vector<std::pair<double, ScenarioRun>>& rows);

/// "%.4f" with negative zero folded to 0.0000.
std::string fixed4(double value);

}  // namespace epicsim
