#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "epicsim/core_model.hpp"
#include "epicsim/scenario.hpp"
#include "epicsim/session.hpp"

namespace epicsim {

class NoFeasibleNode : public Error {
 public:
  using Error::Error;
};

/// Render load a client puts on a node, in pixels per second.
struct ClientDemand {
  std::uint32_t client_id = 0;
  double pixel_rate = 0.0;
};

/// Feasible: active_sessions + clients <= max_sessions, pixel_throughput
/// covers the summed demand, and a path to every client is known. Among
/// feasible nodes the one with the smallest mean one-way latency wins; ties
/// go to the lowest node_id.
const NodeSpec& select_node(const std::vector<NodeSpec>& nodes,
                            const std::vector<ClientDemand>& clients);

/// DISCOVER/OFFER/DEPLOY/READY over a fresh path pair built from profile.
HandshakeTrace deploy_handshake(const NodeSpec& node, std::uint32_t session_id,
                                const NetworkProfile& profile, std::uint64_t seed,
                                Micros start = 0, Micros timeout = 2'000'000);

struct ScenarioRun {
  std::optional<std::uint32_t> node_id;  // edge_hosted only
  HostingMode mode = HostingMode::edge_hosted;
  SessionResult session;
  KpiReport report;
};

/// Candidate nodes with path_to_client filled from the client path lists.
std::vector<NodeSpec> candidate_nodes(const ScenarioConfig& cfg);

SessionTopology build_topology(const ScenarioConfig& cfg);

/// Worst (smallest) per-client battery gain over the remote clients, using
/// each client's time at each ladder level against local rendering at its
/// start level. 0 when every client renders locally.
double scenario_battery_gain(const ScenarioConfig& cfg, const SessionResult& result);

ScenarioRun run_scenario(const ScenarioConfig& cfg);

/// One run per value with identical seeds.
std::vector<std::pair<double, ScenarioRun>> sweep(const ScenarioConfig& cfg,
                                                  const std::string& param_path,
                                                  const std::vector<double>& values);

struct TopologyComparison {
  ScenarioRun edge_hosted;
  ScenarioRun client_hosted;
};

/// Same clients and seed under both hosting modes. Needs master_uplink.
TopologyComparison compare_topologies(const ScenarioConfig& cfg);

/// Scenario with n copies of the client template, seeded with seed ^ n.
ScenarioRun run_with_users(const ScenarioConfig& cfg, int n);

/// rtt_p95 <= rtt_budget and loss_rate <= loss_budget for n users.
bool load_predicate(const ScenarioConfig& cfg, int n, Micros rtt_budget, double loss_budget);
/// loss_rate > 0.05, or queue drops still growing in the last quarter of the run.
bool congestion_predicate(const ScenarioConfig& cfg, int n);

int scenario_load_search(const ScenarioConfig& cfg, Micros rtt_budget, double loss_budget,
                         int n_max);
std::optional<int> scenario_stress_search(const ScenarioConfig& cfg, int n_max);

}  // namespace epicsim
