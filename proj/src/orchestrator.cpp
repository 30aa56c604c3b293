#include "epicsim/orchestrator.hpp"

#include <algorithm>
#include <limits>

#include "epicsim/kpi.hpp"
#include "epicsim/power.hpp"
#include "epicsim/rng.hpp"

namespace epicsim {

const NodeSpec& select_node(const std::vector<NodeSpec>& nodes,
                            const std::vector<ClientDemand>& clients) {
  if (nodes.empty()) throw ValidationError("select_node: empty node list");
  double demand = 0.0;
  for (const auto& c : clients) demand += c.pixel_rate;

  const NodeSpec* best = nullptr;
  double best_latency = std::numeric_limits<double>::infinity();
  for (const auto& node : nodes) {
    if (std::uint64_t{node.active_sessions} + clients.size() > node.max_sessions) continue;
    if (static_cast<double>(node.pixel_throughput) < demand) continue;
    double total = 0.0;
    bool reachable = true;
    for (const auto& c : clients) {
      const auto it = node.path_to_client.find(c.client_id);
      if (it == node.path_to_client.end()) {
        reachable = false;
        break;
      }
      total += static_cast<double>(it->second.one_way_latency);
    }
    if (!reachable) continue;
    const double mean = clients.empty() ? 0.0 : total / static_cast<double>(clients.size());
    if (best == nullptr || mean < best_latency ||
        (mean == best_latency && node.node_id < best->node_id)) {
      best = &node;
      best_latency = mean;
    }
  }
  if (best == nullptr) throw NoFeasibleNode("select_node: no feasible node");
  return *best;
}

HandshakeTrace deploy_handshake(const NodeSpec& node, std::uint32_t session_id,
                                const NetworkProfile& profile, std::uint64_t seed, Micros start,
                                Micros timeout) {
  NetemPath up(profile, mix_seed(seed, session_id, 1));
  NetemPath down(profile, mix_seed(seed, session_id, 2));
  if (start > 0) {
    up.advance_to(start);
    down.advance_to(start);
  }
  return run_handshake(up, down, session_id, node.node_id, start, timeout);
}

std::vector<NodeSpec> candidate_nodes(const ScenarioConfig& cfg) {
  std::vector<NodeSpec> nodes = cfg.nodes;
  for (auto& node : nodes) {
    for (const auto& c : cfg.clients) {
      for (const auto& p : c.paths) {
        if (p.node_id == node.node_id) node.path_to_client[c.client_id] = p.profile;
      }
    }
  }
  return nodes;
}

SessionTopology build_topology(const ScenarioConfig& cfg) {
  SessionTopology topo;
  topo.mode = cfg.mode;
  if (cfg.mode == HostingMode::edge_hosted) {
    const auto nodes = candidate_nodes(cfg);
    std::vector<ClientDemand> demand;
    for (const auto& c : cfg.clients) {
      const QualityLevel& q = cfg.ladder.at(static_cast<std::size_t>(c.start_level));
      demand.push_back({c.client_id, static_cast<double>(q.pixels()) * q.fps() * c.scene_complexity});
    }
    const NodeSpec& node = select_node(nodes, demand);
    topo.host_node = node;
    for (const auto& c : cfg.clients) {
      ClientSpec spec{c.client_id,     node.path_to_client.at(c.client_id), c.power,
                      c.decode_throughput, c.start_level, c.scene_complexity,
                      c.bandwidth_schedule};
      topo.clients.push_back(std::move(spec));
    }
  } else {
    topo.master_client_id = cfg.master_client_id;
    topo.master_uplink = cfg.master_uplink;
    for (const auto& c : cfg.clients) {
      ClientSpec spec{c.client_id,     c.to_master.value_or(c.paths.front().profile),
                      c.power,         c.decode_throughput,
                      c.start_level,   c.scene_complexity,
                      c.bandwidth_schedule};
      topo.clients.push_back(std::move(spec));
    }
  }
  return topo;
}

double scenario_battery_gain(const ScenarioConfig& cfg, const SessionResult& result) {
  std::optional<double> worst;
  for (std::size_t i = 0; i < result.clients.size(); ++i) {
    const ClientSummary& s = result.clients[i];
    if (s.local) continue;
    const ScenarioClient& c = cfg.clients.at(i);
    const auto device_tp = static_cast<double>(cfg.session.device_pixel_throughput);
    const auto decode_tp = static_cast<double>(c.decode_throughput);
    const EnergyConfig local{RenderMode::local_render, c.power,
                             cfg.ladder.at(static_cast<std::size_t>(c.start_level)), device_tp,
                             decode_tp};

    // Offloaded power, time-weighted over the levels the client streamed at.
    double weighted = 0.0;
    Micros total = 0;
    for (std::size_t l = 0; l < s.level_time.size(); ++l) {
      if (s.level_time[l] == 0) continue;
      const EnergyConfig off{RenderMode::offloaded, c.power, cfg.ladder[l], device_tp, decode_tp};
      weighted += average_power(off) * static_cast<double>(s.level_time[l]);
      total += s.level_time[l];
    }
    double p_off = 0.0;
    if (total > 0) {
      p_off = weighted / static_cast<double>(total);
    } else {
      const EnergyConfig off{RenderMode::offloaded, c.power, local.level, device_tp, decode_tp};
      p_off = average_power(off);
    }
    const double gain = (average_power(local) / p_off - 1.0) * 100.0;
    worst = worst ? std::min(*worst, gain) : gain;
  }
  return worst.value_or(0.0);
}

ScenarioRun run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  ScenarioRun run;
  run.mode = cfg.mode;
  const SessionTopology topo = build_topology(cfg);
  if (topo.host_node) run.node_id = topo.host_node->node_id;
  run.session = run_session(topo, cfg.ladder, cfg.duration, cfg.session, cfg.seed);
  run.report = build_report(run.session.trace, scenario_battery_gain(cfg, run.session));
  return run;
}

std::vector<std::pair<double, ScenarioRun>> sweep(const ScenarioConfig& cfg,
                                                  const std::string& param_path,
                                                  const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("sweep: empty values list");
  std::vector<ScenarioConfig> configs;
  for (double v : values) configs.push_back(with_override(cfg, param_path, v));
  std::vector<std::pair<double, ScenarioRun>> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.emplace_back(values[i], run_scenario(configs[i]));
  return out;
}

TopologyComparison compare_topologies(const ScenarioConfig& cfg) {
  if (!cfg.master_uplink) throw ValidationError("compare_topologies: master_uplink is required");
  ScenarioConfig edge = cfg;
  edge.mode = HostingMode::edge_hosted;
  ScenarioConfig client = cfg;
  client.mode = HostingMode::client_hosted;
  return {run_scenario(edge), run_scenario(client)};
}

ScenarioRun run_with_users(const ScenarioConfig& cfg, int n) {
  ScenarioConfig scaled = scale_clients(cfg, n);
  scaled.seed = cfg.seed ^ static_cast<std::uint64_t>(n);
  return run_scenario(scaled);
}

bool load_predicate(const ScenarioConfig& cfg, int n, Micros rtt_budget, double loss_budget) {
  const KpiReport r = run_with_users(cfg, n).report;
  return r.rtt_p95 <= rtt_budget && r.loss_rate <= loss_budget;
}

bool congestion_predicate(const ScenarioConfig& cfg, int n) {
  const ScenarioRun run = run_with_users(cfg, n);
  const RunTrace& t = run.session.trace;
  return run.report.loss_rate > 0.05 || t.queue_drops_at_end > t.queue_drops_at_mark;
}

int scenario_load_search(const ScenarioConfig& cfg, Micros rtt_budget, double loss_budget,
                         int n_max) {
  validate(cfg);
  return load_search([&](int n) { return load_predicate(cfg, n, rtt_budget, loss_budget); }, n_max);
}

std::optional<int> scenario_stress_search(const ScenarioConfig& cfg, int n_max) {
  validate(cfg);
  return stress_search([&](int n) { return congestion_predicate(cfg, n); }, n_max);
}

}  // namespace epicsim
