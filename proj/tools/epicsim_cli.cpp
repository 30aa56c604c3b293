// epicsim command-line front end.
//
// Exit codes: 0 success, 2 validation error, 3 KPI failure (only with
// --enforce-kpi), 1 any other error.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "epicsim/livenet.hpp"
#include "epicsim/orchestrator.hpp"
#include "epicsim/report_json.hpp"

namespace {

using namespace epicsim;

constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitKpi = 3;

volatile std::sig_atomic_t g_interrupted = 0;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ValidationError("--values: not a number: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("--values: empty values list");
  return out;
}

std::pair<std::string, std::uint16_t> parse_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw ValidationError("--addr: expected host:port");
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("--addr: bad port in " + addr);
  }
  if (port < 1024 || port > 65535) throw ValidationError("--addr: port must be in 1024..65535");
  return {addr.substr(0, colon), static_cast<std::uint16_t>(port)};
}

bool all_pass(const KpiReport& r) { return r.pass_rtt && r.pass_bandwidth && r.pass_battery; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epicsim: edge-rendered multi-user AR session testbed"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_path;
  std::uint64_t seed = 0;
  bool enforce_kpi = false;

  auto* run = app.add_subcommand("run", "Run one scenario and write the KPI report");
  run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out_path, "Report file (stdout when omitted)");
  run->add_flag("--enforce-kpi", enforce_kpi, "Exit 3 unless every KPI verdict passes");

  std::string param;
  std::string values_csv;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a scenario once per parameter value");
  sweep_cmd->add_option("--scenario", scenario_path)->required();
  sweep_cmd->add_option("--param", param, "Dotted path, e.g. ladder.*.bpp")->required();
  sweep_cmd->add_option("--values", values_csv, "Comma-separated numbers")->required();
  sweep_cmd->add_option("--out", out_path, "JSON results file");

  double rtt_budget_ms = -1;
  double loss_budget = -1;
  int max_users = 16;
  auto* load = app.add_subcommand("loadtest", "Largest user count within the budgets");
  load->add_option("--scenario", scenario_path)->required();
  load->add_option("--rtt-budget-ms", rtt_budget_ms, "Defaults to budgets.rtt_us");
  load->add_option("--loss-budget", loss_budget, "Defaults to budgets.loss");
  load->add_option("--max-users", max_users)->check(CLI::Range(1, 1024));

  auto* stress = app.add_subcommand("stresstest", "Smallest user count that congests");
  stress->add_option("--scenario", scenario_path)->required();
  stress->add_option("--max-users", max_users)->check(CLI::Range(1, 1024));

  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("--scenario", scenario_path)->required();

  int port = 47000;
  double echo_seconds = 0;
  auto* echo = app.add_subcommand("live-echo", "UDP echo server on localhost");
  echo->add_option("--port", port)->check(CLI::Range(1024, 65535));
  echo->add_option("--duration-s", echo_seconds, "Stop after this many seconds (0 = until SIGINT)");

  std::string addr = "127.0.0.1:47000";
  std::uint32_t count = 1000;
  Micros interval = 1000;
  auto* probe = app.add_subcommand("live-probe", "PING an echo server and report RTT");
  probe->add_option("--addr", addr, "host:port");
  probe->add_option("--count", count);
  probe->add_option("--interval-us", interval);
  probe->add_flag("--enforce-kpi", enforce_kpi, "Exit 3 unless rtt_p95 < 7 ms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run) {
      ScenarioConfig cfg = load_scenario(scenario_path);
      if (*seed_opt) cfg.seed = seed;
      const ScenarioRun result = run_scenario(cfg);
      write_output(out_path, report_json(cfg, result));
      if (enforce_kpi && !all_pass(result.report)) return kExitKpi;
    } else if (*sweep_cmd) {
      const ScenarioConfig cfg = load_scenario(scenario_path);
      const auto rows = sweep(cfg, param, parse_values(values_csv));
      std::cout << sweep_table(param, rows);
      if (!out_path.empty()) write_output(out_path, sweep_json(cfg, param, rows));
    } else if (*load) {
      const ScenarioConfig cfg = load_scenario(scenario_path);
      const Micros budget =
          rtt_budget_ms >= 0 ? static_cast<Micros>(rtt_budget_ms * 1000.0) : cfg.budgets.rtt_us;
      const double loss = loss_budget >= 0 ? loss_budget : cfg.budgets.loss;
      const int n = scenario_load_search(cfg, budget, loss, max_users);
      std::printf("load_search: N = %d (rtt budget %lld us, loss budget %s, max %d)\n", n,
                  static_cast<long long>(budget), fixed4(loss).c_str(), max_users);
    } else if (*stress) {
      const ScenarioConfig cfg = load_scenario(scenario_path);
      const auto n = scenario_stress_search(cfg, max_users);
      if (n) {
        std::printf("stress_search: congestion at N = %d\n", *n);
      } else {
        std::printf("stress_search: no congestion up to %d users\n", max_users);
      }
    } else if (*validate_cmd) {
      const ScenarioConfig cfg = load_scenario(scenario_path);
      std::printf("ok: %s (%zu nodes, %zu clients, %s)\n", cfg.name.c_str(), cfg.nodes.size(),
                  cfg.clients.size(), to_string(cfg.mode));
    } else if (*echo) {
      LiveEndpoint ep;
      ep.port = static_cast<std::uint16_t>(port);
      EchoServer server(ep);
      std::signal(SIGINT, [](int) { g_interrupted = 1; });
      std::signal(SIGTERM, [](int) { g_interrupted = 1; });
      server.start();
      std::fprintf(stderr, "live-echo: listening on %s:%d\n", ep.address.c_str(), port);
      const auto begin = std::chrono::steady_clock::now();
      while (g_interrupted == 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - begin;
        if (echo_seconds > 0 && elapsed.count() >= echo_seconds) break;
      }
      server.stop();
      const EchoCounters c = server.counters();
      std::printf("live-echo: pings %llu frames %llu malformed %llu ignored %llu\n",
                  static_cast<unsigned long long>(c.pings), static_cast<unsigned long long>(c.frames),
                  static_cast<unsigned long long>(c.malformed),
                  static_cast<unsigned long long>(c.ignored));
    } else if (*probe) {
      const auto [host, probe_port] = parse_addr(addr);
      const ProbeResult r = live_probe(host, probe_port, count, interval);
      std::printf("live-probe: sent %llu received %llu loss %s rtt_p50 %lld rtt_p95 %lld rtt_p99 %lld pass_rtt %s\n",
                  static_cast<unsigned long long>(r.sent),
                  static_cast<unsigned long long>(r.received), fixed4(r.loss_rate).c_str(),
                  static_cast<long long>(r.rtt_p50), static_cast<long long>(r.rtt_p95),
                  static_cast<long long>(r.rtt_p99), r.pass_rtt ? "true" : "false");
      if (enforce_kpi && !r.pass_rtt) return kExitKpi;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return 0;
}
