#include "epicsim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace epicsim {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ValidationError(where + ": unknown key \"" + key + "\"");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end()) out = it->template get<T>();
}

NetworkProfile parse_profile(const json& j, const std::string& where) {
  check_keys(j, {"one_way_latency", "jitter", "loss_rate", "bandwidth", "mtu", "queue_capacity"},
             where);
  NetworkProfile p;
  read(j, "one_way_latency", p.one_way_latency);
  read(j, "jitter", p.jitter);
  read(j, "loss_rate", p.loss_rate);
  read(j, "bandwidth", p.bandwidth);
  read(j, "mtu", p.mtu);
  read(j, "queue_capacity", p.queue_capacity);
  return p;
}

json profile_json(const NetworkProfile& p) {
  return {{"one_way_latency", p.one_way_latency}, {"jitter", p.jitter},
          {"loss_rate", p.loss_rate},             {"bandwidth", p.bandwidth},
          {"mtu", p.mtu},                         {"queue_capacity", p.queue_capacity}};
}

PowerProfile parse_power(const json& j, const std::string& where) {
  check_keys(j, {"p_idle", "p_render_local", "p_radio", "p_decode", "battery_capacity"}, where);
  PowerProfile p;
  read(j, "p_idle", p.p_idle);
  read(j, "p_render_local", p.p_render_local);
  read(j, "p_radio", p.p_radio);
  read(j, "p_decode", p.p_decode);
  read(j, "battery_capacity", p.battery_capacity);
  return p;
}

json power_json(const PowerProfile& p) {
  return {{"p_idle", p.p_idle},
          {"p_render_local", p.p_render_local},
          {"p_radio", p.p_radio},
          {"p_decode", p.p_decode},
          {"battery_capacity", p.battery_capacity}};
}

Ladder parse_ladder(const json& j) {
  if (!j.is_array()) throw ValidationError("ladder: expected an array");
  Ladder out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "ladder[" + std::to_string(i) + "]";
    check_keys(j[i], {"index", "width", "height", "fps", "bpp"}, where);
    int index = static_cast<int>(i);
    read(j[i], "index", index);
    out.emplace_back(index, j[i].at("width").get<std::uint32_t>(),
                     j[i].at("height").get<std::uint32_t>(), j[i].at("fps").get<std::uint32_t>(),
                     Rational::from_decimal(j[i].at("bpp").get<double>()));
  }
  return out;
}

json ladder_json(const Ladder& ladder) {
  json out = json::array();
  for (const auto& q : ladder) {
    out.push_back({{"index", q.level_index()},
                   {"width", q.width()},
                   {"height", q.height()},
                   {"fps", q.fps()},
                   {"bpp", q.bpp().to_double()}});
  }
  return out;
}

NodeSpec parse_node(const json& j, const std::string& where) {
  check_keys(j, {"node_id", "pixel_throughput", "encode_throughput", "max_sessions",
                 "active_sessions", "egress"},
             where);
  NodeSpec n;
  n.node_id = j.at("node_id").get<std::uint32_t>();
  read(j, "pixel_throughput", n.pixel_throughput);
  read(j, "encode_throughput", n.encode_throughput);
  read(j, "max_sessions", n.max_sessions);
  read(j, "active_sessions", n.active_sessions);
  if (auto it = j.find("egress"); it != j.end() && !it->is_null()) {
    n.egress = parse_profile(*it, where + ".egress");
  }
  return n;
}

json node_json(const NodeSpec& n) {
  json out = {{"node_id", n.node_id},
              {"pixel_throughput", n.pixel_throughput},
              {"encode_throughput", n.encode_throughput},
              {"max_sessions", n.max_sessions},
              {"active_sessions", n.active_sessions}};
  out["egress"] = n.egress ? profile_json(*n.egress) : json(nullptr);
  return out;
}

ScenarioClient parse_client(const json& j, const std::string& where) {
  check_keys(j, {"client_id", "paths", "to_master", "power", "decode_throughput", "start_level",
                 "scene_complexity", "bandwidth_schedule"},
             where);
  ScenarioClient c;
  c.client_id = j.at("client_id").get<std::uint32_t>();
  if (auto it = j.find("paths"); it != j.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& p = (*it)[i];
      const std::string pw = where + ".paths[" + std::to_string(i) + "]";
      check_keys(p, {"node_id", "profile"}, pw);
      c.paths.push_back({p.at("node_id").get<std::uint32_t>(),
                         parse_profile(p.value("profile", json::object()), pw + ".profile")});
    }
  }
  if (auto it = j.find("to_master"); it != j.end() && !it->is_null()) {
    c.to_master = parse_profile(*it, where + ".to_master");
  }
  if (auto it = j.find("power"); it != j.end()) c.power = parse_power(*it, where + ".power");
  read(j, "decode_throughput", c.decode_throughput);
  read(j, "start_level", c.start_level);
  read(j, "scene_complexity", c.scene_complexity);
  if (auto it = j.find("bandwidth_schedule"); it != j.end()) {
    for (const auto& s : *it) {
      check_keys(s, {"at", "bandwidth"}, where + ".bandwidth_schedule");
      c.bandwidth_schedule.push_back({s.at("at").get<Micros>(), s.at("bandwidth").get<std::uint64_t>()});
    }
  }
  return c;
}

json client_json(const ScenarioClient& c) {
  json paths = json::array();
  for (const auto& p : c.paths) paths.push_back({{"node_id", p.node_id}, {"profile", profile_json(p.profile)}});
  json schedule = json::array();
  for (const auto& s : c.bandwidth_schedule) schedule.push_back({{"at", s.at}, {"bandwidth", s.bandwidth}});
  json out = {{"client_id", c.client_id},
              {"paths", paths},
              {"power", power_json(c.power)},
              {"decode_throughput", c.decode_throughput},
              {"start_level", c.start_level},
              {"scene_complexity", c.scene_complexity},
              {"bandwidth_schedule", schedule}};
  out["to_master"] = c.to_master ? profile_json(*c.to_master) : json(nullptr);
  return out;
}

void parse_controller(const json& j, ScenarioConfig& cfg) {
  check_keys(j, {"enabled", "rtt_budget", "loss_threshold", "throughput_factor", "k_down", "k_up",
                 "cooldown", "window", "capacity_gate"},
             "controller");
  ControllerParams& p = cfg.session.controller;
  read(j, "enabled", cfg.session.adaptation);
  read(j, "rtt_budget", p.rtt_budget);
  read(j, "loss_threshold", p.loss_threshold);
  read(j, "throughput_factor", p.throughput_factor);
  read(j, "k_down", p.k_down);
  read(j, "k_up", p.k_up);
  read(j, "cooldown", p.cooldown);
  read(j, "window", p.window);
  read(j, "capacity_gate", p.capacity_gate);
}

void parse_session(const json& j, SessionSettings& s) {
  check_keys(j, {"input_interval", "ping_interval", "sync_hz", "sync_bytes", "render_ahead",
                 "device_pixel_throughput", "device_encode_throughput", "handshake",
                 "handshake_timeout"},
             "session");
  read(j, "input_interval", s.input_interval);
  read(j, "ping_interval", s.ping_interval);
  read(j, "sync_hz", s.sync_hz);
  read(j, "sync_bytes", s.sync_bytes);
  read(j, "render_ahead", s.render_ahead);
  read(j, "device_pixel_throughput", s.device_pixel_throughput);
  read(j, "device_encode_throughput", s.device_encode_throughput);
  read(j, "handshake", s.handshake);
  read(j, "handshake_timeout", s.handshake_timeout);
}

HostingMode parse_mode(const std::string& s) {
  if (s == "edge_hosted") return HostingMode::edge_hosted;
  if (s == "client_hosted") return HostingMode::client_hosted;
  throw ValidationError("topology.mode: expected edge_hosted or client_hosted, got \"" + s + "\"");
}

// Walks a dotted path and assigns value at every match. Returns match count.
std::size_t assign_path(json& node, const std::vector<std::string>& parts, std::size_t i,
                        double value, const std::string& path) {
  if (i == parts.size()) {
    if (node.is_number_integer() || node.is_number_unsigned()) {
      if (value != std::floor(value)) {
        throw ValidationError("sweep: " + path + " is an integer field, got " + std::to_string(value));
      }
      node = static_cast<std::int64_t>(value);
    } else if (node.is_number_float()) {
      node = value;
    } else {
      throw ValidationError("sweep: " + path + " does not address a numeric field");
    }
    return 1;
  }
  const std::string& part = parts[i];
  if (node.is_array()) {
    if (part == "*") {
      std::size_t n = 0;
      for (auto& child : node) n += assign_path(child, parts, i + 1, value, path);
      return n;
    }
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ValidationError("sweep: unknown parameter path " + path);
    }
    if (idx >= node.size()) throw ValidationError("sweep: index out of range in " + path);
    return assign_path(node[idx], parts, i + 1, value, path);
  }
  if (node.is_object()) {
    auto it = node.find(part);
    if (it == node.end()) throw ValidationError("sweep: unknown parameter path " + path);
    return assign_path(*it, parts, i + 1, value, path);
  }
  throw ValidationError("sweep: unknown parameter path " + path);
}

}  // namespace

void validate(const ScenarioConfig& cfg) {
  if (cfg.nodes.empty()) throw ValidationError("scenario: at least one node is required");
  if (cfg.clients.empty()) throw ValidationError("scenario: at least one client is required");
  if (cfg.duration < 1'000'000) throw ValidationError("scenario: duration must be at least 1 s");
  validate_ladder(cfg.ladder);
  validate(cfg.session);
  if (cfg.budgets.rtt_us <= 0 || cfg.budgets.loss < 0.0 || cfg.budgets.loss > 1.0) {
    throw ValidationError("scenario: bad KPI budgets");
  }

  std::set<std::uint32_t> node_ids;
  for (const auto& n : cfg.nodes) {
    validate(n);
    if (!node_ids.insert(n.node_id).second) {
      throw ValidationError("scenario: duplicate node id " + std::to_string(n.node_id));
    }
  }
  std::set<std::uint32_t> client_ids;
  for (const auto& c : cfg.clients) {
    const std::string who = "scenario: client " + std::to_string(c.client_id);
    if (!client_ids.insert(c.client_id).second) throw ValidationError(who + " is duplicated");
    if (c.paths.empty()) throw ValidationError(who + " has no paths");
    for (const auto& p : c.paths) {
      if (!node_ids.contains(p.node_id)) {
        throw ValidationError(who + " references unknown node " + std::to_string(p.node_id));
      }
      validate(p.profile);
    }
    if (c.to_master) validate(*c.to_master);
  }
  if (cfg.mode == HostingMode::client_hosted) {
    if (!client_ids.contains(cfg.master_client_id)) {
      throw ValidationError("scenario: master client " + std::to_string(cfg.master_client_id) +
                            " is not among the clients");
    }
    if (!cfg.master_uplink) throw ValidationError("scenario: client_hosted requires master_uplink");
    validate(*cfg.master_uplink);
  }
}

ScenarioConfig parse_scenario(const json& doc) {
  ScenarioConfig cfg;
  try {
    check_keys(doc, {"name", "seed", "duration", "ladder", "nodes", "clients", "topology",
                     "controller", "budgets", "session"},
               "scenario");
    read(doc, "name", cfg.name);
    read(doc, "seed", cfg.seed);
    read(doc, "duration", cfg.duration);
    if (auto it = doc.find("ladder"); it != doc.end()) cfg.ladder = parse_ladder(*it);
    for (std::size_t i = 0; i < doc.value("nodes", json::array()).size(); ++i) {
      cfg.nodes.push_back(parse_node(doc["nodes"][i], "nodes[" + std::to_string(i) + "]"));
    }
    for (std::size_t i = 0; i < doc.value("clients", json::array()).size(); ++i) {
      cfg.clients.push_back(parse_client(doc["clients"][i], "clients[" + std::to_string(i) + "]"));
    }
    if (auto it = doc.find("topology"); it != doc.end()) {
      check_keys(*it, {"mode", "master_client_id", "master_uplink"}, "topology");
      if (it->contains("mode")) cfg.mode = parse_mode(it->at("mode").get<std::string>());
      read(*it, "master_client_id", cfg.master_client_id);
      if (auto up = it->find("master_uplink"); up != it->end() && !up->is_null()) {
        cfg.master_uplink = parse_profile(*up, "topology.master_uplink");
      }
    }
    if (auto it = doc.find("controller"); it != doc.end()) parse_controller(*it, cfg);
    if (auto it = doc.find("session"); it != doc.end()) parse_session(*it, cfg.session);
    if (auto it = doc.find("budgets"); it != doc.end()) {
      check_keys(*it, {"rtt_us", "loss"}, "budgets");
      read(*it, "rtt_us", cfg.budgets.rtt_us);
      read(*it, "loss", cfg.budgets.loss);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ScenarioConfig parse_scenario_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  return parse_scenario(doc);
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("scenario: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario_text(text.str());
}

json to_json(const ScenarioConfig& cfg) {
  json nodes = json::array();
  for (const auto& n : cfg.nodes) nodes.push_back(node_json(n));
  json clients = json::array();
  for (const auto& c : cfg.clients) clients.push_back(client_json(c));
  const ControllerParams& p = cfg.session.controller;
  const SessionSettings& s = cfg.session;
  json topology = {{"mode", to_string(cfg.mode)}, {"master_client_id", cfg.master_client_id}};
  topology["master_uplink"] = cfg.master_uplink ? profile_json(*cfg.master_uplink) : json(nullptr);
  return {
      {"name", cfg.name},
      {"seed", cfg.seed},
      {"duration", cfg.duration},
      {"ladder", ladder_json(cfg.ladder)},
      {"nodes", nodes},
      {"clients", clients},
      {"topology", topology},
      {"controller",
       {{"enabled", s.adaptation},
        {"rtt_budget", p.rtt_budget},
        {"loss_threshold", p.loss_threshold},
        {"throughput_factor", p.throughput_factor},
        {"k_down", p.k_down},
        {"k_up", p.k_up},
        {"cooldown", p.cooldown},
        {"window", p.window},
        {"capacity_gate", p.capacity_gate}}},
      {"session",
       {{"input_interval", s.input_interval},
        {"ping_interval", s.ping_interval},
        {"sync_hz", s.sync_hz},
        {"sync_bytes", s.sync_bytes},
        {"render_ahead", s.render_ahead},
        {"device_pixel_throughput", s.device_pixel_throughput},
        {"device_encode_throughput", s.device_encode_throughput},
        {"handshake", s.handshake},
        {"handshake_timeout", s.handshake_timeout}}},
      {"budgets", {{"rtt_us", cfg.budgets.rtt_us}, {"loss", cfg.budgets.loss}}},
  };
}

ScenarioConfig with_override(const ScenarioConfig& cfg, const std::string& path, double value) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ValidationError("sweep: malformed parameter path " + path);
    parts.push_back(part);
  }
  if (parts.empty()) throw ValidationError("sweep: empty parameter path");
  json doc = to_json(cfg);
  if (assign_path(doc, parts, 0, value, path) == 0) {
    throw ValidationError("sweep: parameter path " + path + " matched nothing");
  }
  return parse_scenario(doc);
}

ScenarioConfig scale_clients(const ScenarioConfig& cfg, int n) {
  if (n < 1) throw ValidationError("scale_clients: n must be >= 1");
  if (cfg.clients.empty()) throw ValidationError("scale_clients: scenario has no client template");
  ScenarioConfig out = cfg;
  out.clients.clear();
  for (int i = 0; i < n; ++i) {
    ScenarioClient c = cfg.clients.front();
    c.client_id = static_cast<std::uint32_t>(i);
    out.clients.push_back(std::move(c));
  }
  out.master_client_id = 0;
  return out;
}

}  // namespace epicsim
