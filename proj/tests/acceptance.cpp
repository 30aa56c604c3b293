// One line per acceptance criterion: "ACCEPT NN PASS|FAIL detail".
// Expected values are computed here from first principles, not read back
// from the library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>

#include "epicsim/crc32.hpp"
#include "epicsim/livenet.hpp"
#include "epicsim/netem.hpp"
#include "epicsim/orchestrator.hpp"
#include "epicsim/power.hpp"
#include "epicsim/report_json.hpp"
#include "epicsim/transport.hpp"
#include "oracles.hpp"

using namespace epicsim;

namespace {

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  std::printf("ACCEPT %02d %s %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void criterion(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    verdict(id, false, std::string("exception: ") + e.what());
  }
}

std::string scenario_file(const std::string& name) {
  return std::string(EPICSIM_SCENARIOS) + "/" + name + ".json";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Exact-integer serialization time, rounded up.
std::int64_t ser_us(std::uint64_t bytes, std::uint64_t bandwidth) {
  return static_cast<std::int64_t>((bytes * 8 * 1'000'000 + bandwidth - 1) / bandwidth);
}

void rtt_classification() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig cfg = load_scenario(scenario_file("edge-nominal"));
  const ScenarioRun run = run_scenario(cfg);
  const double wall = seconds_since(t0);
  const auto& p = cfg.clients[0].paths[0].profile;
  const double oracle = 2.0 * static_cast<double>(p.one_way_latency + ser_us(kHeaderSize, p.bandwidth));
  const double p95 = static_cast<double>(run.report.rtt_p95);
  const bool ok = std::abs(p95 - 4001.0) <= 0.02 * 4001.0 && std::abs(p95 - oracle) <= 0.02 * oracle &&
                  run.report.pass_rtt && wall < 5.0;
  verdict(1, ok, fmt("rtt_p95=%lld oracle=%.0f pass_rtt=%s wall=%.2fs", static_cast<long long>(run.report.rtt_p95),
                     oracle, run.report.pass_rtt ? "true" : "false", wall));
}

void bandwidth_classification() {
  const ScenarioConfig base = load_scenario(scenario_file("edge-nominal"));
  const ScenarioRun eight = run_scenario(scale_clients(base, 8));
  const ScenarioRun five = run_scenario(scale_clients(base, 5));
  const double expected = 8.0 * static_cast<double>(oracle::bitrate(1920, 1080, 60, 4, 5));
  const double got = static_cast<double>(eight.report.aggregate_throughput);
  const bool ok = expected == 796'262'400.0 && std::abs(got - expected) <= 0.02 * expected &&
                  eight.report.pass_bandwidth && !five.report.pass_bandwidth;
  verdict(2, ok, fmt("8 clients=%llu (expected %.0f) pass=%s; 5 clients=%llu pass=%s",
                     static_cast<unsigned long long>(eight.report.aggregate_throughput), expected,
                     eight.report.pass_bandwidth ? "true" : "false",
                     static_cast<unsigned long long>(five.report.aggregate_throughput),
                     five.report.pass_bandwidth ? "true" : "false"));
}

// Low-spec device: render and decode throughput 1e8 px/s saturate both at L0.
void battery_classification() {
  const QualityLevel l0 = default_ladder()[0];
  const EnergyConfig local{RenderMode::local_render, PowerProfile{}, l0, 1e8, 1e8};
  const EnergyConfig off{RenderMode::offloaded, PowerProfile{}, l0, 1e8, 1e8};
  const PowerProfile d;
  const double u_local = std::min(1.0, 2'073'600.0 / 1e8 * 60.0);
  const double u_dec = std::min(1.0, 2'073'600.0 / 1e8 * 60.0);
  const double p_local = d.p_idle + d.p_render_local * u_local;
  const double p_off = d.p_idle + d.p_radio + d.p_decode * u_dec;
  const double expected = (p_local / p_off - 1.0) * 100.0;
  const double gain = battery_life_gain(local, off);
  KpiReport r;
  r.battery_gain = gain;
  EnergyConfig radio = off;
  radio.profile.p_radio = 2.7;
  KpiReport r2;
  r2.battery_gain = battery_life_gain(local, radio);
  const bool ok = std::round(expected * 1000) == 50'000 && std::round(gain * 1000) == std::round(expected * 1000) &&
                  battery_verdict(r) && !battery_verdict(r2);
  verdict(3, ok, fmt("P_local=%.3f P_off=%.3f gain=%.3f%% pass=%s; p_radio 2.7 gain=%.3f%% pass=%s",
                     average_power(local), average_power(off), gain, battery_verdict(r) ? "true" : "false",
                     r2.battery_gain, battery_verdict(r2) ? "true" : "false"));
}

void determinism() {
  int diffs = 0;
  for (const char* name : {"edge-nominal", "bandwidth-step", "shared-egress", "master-server", "master-server-edge"}) {
    const ScenarioConfig cfg = load_scenario(scenario_file(name));
    if (report_json(cfg, run_scenario(cfg)) != report_json(cfg, run_scenario(cfg))) ++diffs;
  }
  verdict(4, diffs == 0, fmt("5 scenarios x 2 runs, %d diffs", diffs));
}

void netem_oracle() {
  std::mt19937_64 gen(20'240'601);
  std::uint64_t packets = 0, mismatches = 0, drops = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const oracle::NetemCase c = oracle::random_netem_case(gen, 1000);
    NetemPath path(c.profile, c.seed);
    const auto expected = oracle::stepped_path(c.profile, c.seed, c.packets);
    for (std::size_t i = 0; i < c.packets.size(); ++i) {
      const auto r = path.submit(Packet{std::vector<std::uint8_t>(c.packets[i].size), 0}, c.packets[i].submit);
      const bool loss = r.outcome == SubmitOutcome::dropped_loss;
      const bool queue = r.outcome == SubmitOutcome::dropped_queue;
      bool same = loss == expected[i].dropped_loss && queue == expected[i].dropped_queue;
      if (r.outcome == SubmitOutcome::scheduled) same = same && r.delivery_time == expected[i].arrival;
      mismatches += same ? 0 : 1;
      drops += (loss || queue) ? 1 : 0;
      ++packets;
    }
  }
  verdict(5, mismatches == 0,
          fmt("%llu packets over 20 profiles, %llu drops, %llu mismatches", static_cast<unsigned long long>(packets),
              static_cast<unsigned long long>(drops), static_cast<unsigned long long>(mismatches)));
}

void transport_roundtrips() {
  std::mt19937_64 gen(6);
  int bad_messages = 0;
  for (int i = 0; i < 10'000; ++i) {
    const Message m = oracle::random_message(gen);
    const auto bytes = encode_message(m.header, m.payload);
    auto ref = oracle::reference_header(static_cast<std::uint8_t>(m.header.type), m.header.flags,
                                        m.header.session_id, m.header.sequence, m.header.timestamp);
    ref.insert(ref.end(), m.payload.begin(), m.payload.end());
    if (bytes != ref || decode_message(bytes) != m) ++bad_messages;
  }

  int bad_frames = 0;
  std::uint64_t total_bytes = 0;
  oracle::SplitMix fill{77};
  Reassembler reasm;
  for (std::uint32_t id = 1; id <= 1000; ++id) {
    const std::size_t size = 1 + gen() % 10'000'000;
    std::vector<std::uint8_t> payload(size);
    for (std::size_t k = 0; k < size; k += 8) {
      const std::uint64_t v = fill.next();
      std::memcpy(payload.data() + k, &v, std::min<std::size_t>(8, size - k));
    }
    // Smallest mtu whose capacity still fits 10 MB in 65,535 fragments is 185.
    const std::size_t mtu = 192 + gen() % (9000 - 192 + 1);
    auto frags = fragment(id, payload, mtu);
    std::shuffle(frags.begin(), frags.end(), gen);
    Reassembler::Result last;
    for (const auto& f : frags) last = reasm.offer(decode_fragment(decode_message(encode_fragment(f))), 0);
    const std::uint32_t crc = crc32(payload);
    const bool crc_ok = id > 20 || crc == oracle::crc32_bitwise(payload.data(), payload.size());
    if (last.status != Reassembler::Result::Status::complete || last.payload != payload ||
        crc32(last.payload) != crc || !crc_ok) {
      ++bad_frames;
    }
    total_bytes += size;
  }

  const std::vector<std::uint8_t> golden = {0x45, 0x50, 0x49, 0x43, 0x01, 0x03, 0x00, 0x00,
                                            0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x07,
                                            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x03, 0xE8};
  const bool golden_ok = encode_message({MsgType::ping, 0, 1, 7, 1000}, {}) == golden;
  verdict(6, bad_messages == 0 && bad_frames == 0 && golden_ok,
          fmt("10000 messages (%d bad), 1000 frames / %.1f MB (%d bad), golden %s", bad_messages,
              static_cast<double>(total_bytes) / 1e6, bad_frames, golden_ok ? "match" : "MISMATCH"));
}

void controller_convergence() {
  const ScenarioConfig cfg = load_scenario(scenario_file("bandwidth-step"));
  const ScenarioRun run = run_scenario(cfg);
  const BandwidthStep step = cfg.clients[0].bandwidth_schedule.at(0);
  // Highest level whose bitrate fits 0.9 x the stepped bandwidth.
  int target = -1;
  for (std::size_t i = 0; i < cfg.ladder.size(); ++i) {
    const auto& q = cfg.ladder[i];
    const Rational b = q.bpp();
    const std::uint64_t rate = oracle::bitrate(q.width(), q.height(), q.fps(), static_cast<std::uint64_t>(b.num),
                                               static_cast<std::uint64_t>(b.den));
    if (static_cast<double>(rate) <= 0.9 * static_cast<double>(step.bandwidth)) {
      target = static_cast<int>(i);
      break;
    }
  }
  const Micros step_at = run.session.start_time + step.at;
  Micros last_change = step_at;
  for (const auto& c : run.session.trace.level_timeline) last_change = std::max(last_change, c.time);
  const int final_level = run.session.clients.at(0).final_level;
  const bool ok = target == 3 && final_level == target && last_change - step_at <= 5'000'000 &&
                  !run.session.trace.level_timeline.empty();
  verdict(7, ok, fmt("target L%d, final L%d, %zu changes, settled %.3f s after the step (run ends %.3f s after)",
                     target, final_level, run.session.trace.level_timeline.size(),
                     static_cast<double>(last_change - step_at) / 1e6,
                     static_cast<double>(cfg.duration - step.at) / 1e6));
}

void load_and_stress() {
  const ScenarioConfig cfg = load_scenario(scenario_file("shared-egress"));
  const int n_max = 16;
  const int load = scenario_load_search(cfg, cfg.budgets.rtt_us, cfg.budgets.loss, n_max);
  const auto stress = scenario_stress_search(cfg, n_max);
  // Exhaustive evaluation of both predicates, then a plain scan.
  std::vector<bool> fits(n_max + 1), congested(n_max + 1);
  for (int n = 1; n <= n_max; ++n) {
    fits[n] = load_predicate(cfg, n, cfg.budgets.rtt_us, cfg.budgets.loss);
    congested[n] = congestion_predicate(cfg, n);
  }
  int load_oracle = 0;
  while (load_oracle < n_max && fits[load_oracle + 1]) ++load_oracle;
  int stress_oracle = 0;
  for (int n = 1; n <= n_max && stress_oracle == 0; ++n) stress_oracle = congested[n] ? n : 0;
  const bool ok = load == 10 && stress == 11 && load == load_oracle && stress.value_or(0) == stress_oracle;
  verdict(8, ok, fmt("load_search=%d (scan %d), stress_search=%d (scan %d)", load, load_oracle, stress.value_or(0),
                     stress_oracle));
}

void topology_comparison() {
  const ScenarioConfig cfg = load_scenario(scenario_file("master-server"));
  const TopologyComparison cmp = compare_topologies(cfg);
  const double ch = cmp.client_hosted.report.loss_rate;
  const double eh = cmp.edge_hosted.report.loss_rate;
  verdict(9, ch > 0.5 && eh < 0.01,
          fmt("client_hosted loss=%s, edge_hosted loss=%s, seed %llu", fixed4(ch).c_str(), fixed4(eh).c_str(),
              static_cast<unsigned long long>(cfg.seed)));
}

void live_loopback() {
  const auto t0 = std::chrono::steady_clock::now();
  std::unique_ptr<EchoServer> server;
  for (int attempt = 0; attempt < 100 && !server; ++attempt) {
    LiveEndpoint ep;
    ep.port = static_cast<std::uint16_t>(47'000 + attempt);
    try {
      server = std::make_unique<EchoServer>(ep);
    } catch (const LiveError&) {
    }
  }
  if (!server) throw LiveError("no bindable port in 47000..47099");
  server->start();
  const ProbeResult r = live_probe("127.0.0.1", server->port(), 1000);
  server->stop();
  const double wall = seconds_since(t0);
  const bool positive = std::all_of(r.rtt_samples.begin(), r.rtt_samples.end(), [](Micros s) { return s > 0; });
  std::uint64_t ts = 0;
  for (std::size_t i = 16; i < r.first_ping.size(); ++i) ts = ts << 8 | r.first_ping[i];
  const bool golden = r.first_ping.size() == kHeaderSize && r.first_ping == oracle::reference_header(0x03, 0, 1, 0, ts);
  verdict(10, r.loss_rate <= 0.001 && positive && golden && wall < 10.0,
          fmt("sent %llu received %llu loss %s p50 %lld p95 %lld us, first PING %s, wall %.2fs",
              static_cast<unsigned long long>(r.sent), static_cast<unsigned long long>(r.received),
              fixed4(r.loss_rate).c_str(), static_cast<long long>(r.rtt_p50), static_cast<long long>(r.rtt_p95),
              golden ? "matches" : "MISMATCH", wall));
}

}  // namespace

int main() {
  criterion(1, rtt_classification);
  criterion(2, bandwidth_classification);
  criterion(3, battery_classification);
  criterion(4, determinism);
  criterion(5, netem_oracle);
  criterion(6, transport_roundtrips);
  criterion(7, controller_convergence);
  criterion(8, load_and_stress);
  criterion(9, topology_comparison);
  criterion(10, live_loopback);
  std::printf("ACCEPT %s (%d failing)\n", failures == 0 ? "ALL PASS" : "INCOMPLETE", failures);
  return failures == 0 ? 0 : 1;
}
