#include "epicsim/report_json.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace epicsim {

namespace {

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

// Shortest round-trip form for a sweep value.
std::string number(double v) { return nlohmann::json(v).dump(); }

class Writer {
 public:
  explicit Writer(std::ostringstream& out, int indent) : out_(out), indent_(indent) {}

  void open(const char* key, char bracket) {
    field(key);
    out_ << bracket;
    first_ = true;
    ++indent_;
  }
  void open_item(char bracket) {
    item();
    out_ << bracket;
    first_ = true;
    ++indent_;
  }
  void close(char bracket) {
    --indent_;
    if (!first_) newline();
    out_ << bracket;
    first_ = false;
  }
  template <typename T>
  void put(const char* key, const T& raw) {
    field(key);
    out_ << raw;
  }
  void put_bool(const char* key, bool v) { put(key, v ? "true" : "false"); }
  void put_str(const char* key, const std::string& v) { put(key, quote(v)); }

 private:
  void item() {
    if (!first_) out_ << ',';
    newline();
    first_ = false;
  }
  void field(const char* key) {
    item();
    if (key != nullptr) out_ << '"' << key << "\": ";
  }
  void newline() { out_ << '\n' << std::string(static_cast<std::size_t>(indent_) * 2, ' '); }

  std::ostringstream& out_;
  int indent_;
  bool first_ = true;
};

void write_report(Writer& w, const KpiReport& r) {
  w.put("rtt_p50", r.rtt_p50);
  w.put("rtt_p95", r.rtt_p95);
  w.put("rtt_p99", r.rtt_p99);
  w.put("motion_to_photon_p95", r.motion_to_photon_p95);
  w.put("aggregate_throughput", r.aggregate_throughput);
  w.put("loss_rate", fixed4(r.loss_rate));
  w.put("battery_gain", fixed4(r.battery_gain));
  w.put_bool("pass_rtt", r.pass_rtt);
  w.put_bool("pass_bandwidth", r.pass_bandwidth);
  w.put_bool("pass_battery", r.pass_battery);
  w.put("frames_sent", r.frames_sent);
  w.put("frames_delivered", r.frames_delivered);
  w.put("frames_dropped", r.frames_dropped);
  w.put("frames_in_flight", r.frames_in_flight);
}

void write_run(Writer& w, const ScenarioRun& run) {
  if (run.node_id) {
    w.put("node_id", *run.node_id);
  } else {
    w.put("node_id", "null");
  }
  w.put_str("mode", to_string(run.mode));
  w.put("session_start", run.session.start_time);
  w.open("report", '{');
  write_report(w, run.report);
  w.close('}');

  w.open("clients", '[');
  for (const auto& c : run.session.clients) {
    w.open_item('{');
    w.put("client_id", c.client_id);
    w.put_bool("local", c.local);
    w.put("frames_sent", c.frames_sent);
    w.put("frames_delivered", c.frames_delivered);
    w.put("frames_dropped", c.frames_dropped);
    w.put("frames_in_flight", c.frames_in_flight);
    w.put("host_skipped", c.host_skipped);
    w.put("delivered_bits", c.delivered_bits);
    w.put("inputs_at_host", c.inputs_at_host);
    w.put("syncs_received", c.syncs_received);
    w.put("rtt_samples", c.rtt_samples);
    w.put("final_level", c.final_level);
    w.close('}');
  }
  w.close(']');

  w.open("paths", '[');
  for (std::size_t i = 0; i < run.session.path_names.size(); ++i) {
    const PathCounters& pc = run.session.path_counters[i];
    w.open_item('{');
    w.put_str("name", run.session.path_names[i]);
    w.put("submitted", pc.submitted);
    w.put("delivered", pc.delivered);
    w.put("dropped_loss", pc.dropped_loss);
    w.put("dropped_queue", pc.dropped_queue);
    w.close('}');
  }
  w.close(']');

  w.open("level_changes", '[');
  for (const auto& ch : run.session.trace.level_timeline) {
    w.open_item('{');
    w.put("time", ch.time);
    w.put("client_id", ch.client_id);
    w.put("window_index", ch.window_index);
    w.put("from", ch.from);
    w.put("to", ch.to);
    w.put_str("cause", ch.cause);
    w.close('}');
  }
  w.close(']');
}

}  // namespace

std::string fixed4(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string report_json(const ScenarioConfig& cfg, const ScenarioRun& run) {
  std::ostringstream out;
  out << '{';
  Writer w(out, 1);
  w.put_str("scenario", cfg.name);
  w.put("seed", cfg.seed);
  w.put("duration", cfg.duration);
  write_run(w, run);
  out << "\n}\n";
  return out.str();
}

std::string sweep_json(const ScenarioConfig& cfg, const std::string& param_path,
                       const std::vector<std::pair<double, ScenarioRun>>& rows) {
  std::ostringstream out;
  out << '{';
  Writer w(out, 1);
  w.put_str("scenario", cfg.name);
  w.put("seed", cfg.seed);
  w.put("duration", cfg.duration);
  w.put_str("param", param_path);
  w.open("rows", '[');
  for (const auto& [value, run] : rows) {
    w.open_item('{');
    w.put("value", number(value));
    w.open("report", '{');
    write_report(w, run.report);
    w.close('}');
    w.close('}');
  }
  w.close(']');
  out << "\n}\n";
  return out.str();
}

std::string sweep_table(const std::string& param_path,
                        const std::vector<std::pair<double, ScenarioRun>>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %9s %9s %9s %9s %14s %8s\n", param_path.c_str(), "rtt_p50",
                "rtt_p95", "rtt_p99", "m2p_p95", "throughput", "loss");
  out << line;
  for (const auto& [value, run] : rows) {
    const KpiReport& r = run.report;
    std::snprintf(line, sizeof line, "%-14s %9lld %9lld %9lld %9lld %14llu %8s\n",
                  number(value).c_str(), static_cast<long long>(r.rtt_p50),
                  static_cast<long long>(r.rtt_p95), static_cast<long long>(r.rtt_p99),
                  static_cast<long long>(r.motion_to_photon_p95),
                  static_cast<unsigned long long>(r.aggregate_throughput),
                  fixed4(r.loss_rate).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace epicsim
