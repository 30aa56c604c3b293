#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "epicsim/core_model.hpp"
#include "epicsim/session.hpp"

namespace epicsim {

struct ClientPath {
  std::uint32_t node_id = 0;
  NetworkProfile profile;
};

struct ScenarioClient {
  std::uint32_t client_id = 0;
  /// One path per candidate edge node.
  std::vector<ClientPath> paths;
  /// Path to the master client in client_hosted mode; defaults to paths[0].
  std::optional<NetworkProfile> to_master;
  PowerProfile power;
  std::uint64_t decode_throughput = 7'000'000'000;
  int start_level = 0;
  double scene_complexity = 1.0;
  std::vector<BandwidthStep> bandwidth_schedule;
};

struct KpiBudgets {
  Micros rtt_us = kRttThreshold;
  double loss = 0.02;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  Micros duration = 10'000'000;
  Ladder ladder = default_ladder();
  std::vector<NodeSpec> nodes;
  std::vector<ScenarioClient> clients;
  HostingMode mode = HostingMode::edge_hosted;
  std::uint32_t master_client_id = 0;
  std::optional<NetworkProfile> master_uplink;
  /// Controller parameters live in session.controller, the on/off switch in
  /// session.adaptation.
  SessionSettings session;
  KpiBudgets budgets;
};

/// Throws ValidationError on missing nodes or clients, unresolved ids, or any
/// invalid nested value.
void validate(const ScenarioConfig& cfg);

ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig parse_scenario_text(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);
nlohmann::json to_json(const ScenarioConfig& cfg);

/// Sets the numeric field at a dotted path ("ladder.*.bpp",
/// "clients.0.paths.0.profile.bandwidth"); "*" applies to every array element.
/// Throws ValidationError for unknown or non-numeric paths.
ScenarioConfig with_override(const ScenarioConfig& cfg, const std::string& path, double value);

/// Replaces the client list with n copies of clients[0], ids 0..n-1. In
/// client_hosted mode the master becomes client 0.
ScenarioConfig scale_clients(const ScenarioConfig& cfg, int n);

}  // namespace epicsim
