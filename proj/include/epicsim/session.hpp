#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epicsim/adapt.hpp"
#include "epicsim/core_model.hpp"
#include "epicsim/kpi.hpp"
#include "epicsim/netem.hpp"
#include "epicsim/transport.hpp"

namespace epicsim {

enum class HostingMode { edge_hosted, client_hosted };

const char* to_string(HostingMode mode);

/// Access-link bandwidth change, relative to session start.
struct BandwidthStep {
  Micros at = 0;
  std::uint64_t bandwidth = 0;
};

struct ClientSpec {
  std::uint32_t client_id = 0;
  NetworkProfile profile;  // path between this client and the host
  PowerProfile power;
  std::uint64_t decode_throughput = 7'000'000'000;
  int start_level = 0;
  double scene_complexity = 1.0;
  std::vector<BandwidthStep> bandwidth_schedule;
};

/// Edge-hosted: every client talks to host_node over its own path (plus the
/// node's shared egress, if configured). Client-hosted: the master client is
/// the host; every downstream frame to another client first crosses the
/// single master_uplink path.
struct SessionTopology {
  HostingMode mode = HostingMode::edge_hosted;
  std::uint32_t master_client_id = 0;
  std::vector<ClientSpec> clients;
  std::optional<NodeSpec> host_node;
  std::optional<NetworkProfile> master_uplink;
};

void validate(const SessionTopology& topology, const Ladder& ladder);

struct SessionSettings {
  Micros input_interval = 8333;  // ~120 Hz
  Micros ping_interval = 100'000;
  std::uint32_t sync_hz = 20;  // 0 disables STATE_SYNC
  std::uint32_t sync_bytes = 256;
  int render_ahead = 0;  // 0 or 1
  std::uint64_t device_pixel_throughput = 200'000'000;
  std::uint64_t device_encode_throughput = 200'000'000;
  bool adaptation = true;
  ControllerParams controller;
  bool handshake = true;
  Micros handshake_timeout = 2'000'000;
};

void validate(const SessionSettings& settings);

class HandshakeTimeout : public Error {
 public:
  using Error::Error;
};

struct HandshakeStep {
  ControlSubtype subtype = ControlSubtype::discover;
  bool upstream = true;
  Micros sent = 0;
  std::optional<Micros> arrival;  // nullopt when the path dropped it
};

struct HandshakeTrace {
  std::uint32_t session_id = 0;
  std::vector<HandshakeStep> steps;  // every transmission, retries included
  /// Arrival time of the first accepted copy of each message, in protocol order.
  std::vector<std::pair<ControlSubtype, Micros>> accepted;
  Micros ready_at = 0;
};

/// DISCOVER -> OFFER -> DEPLOY -> READY over one client-host path pair.
/// Client requests are retried every 250 ms; throws HandshakeTimeout when
/// READY has not arrived within timeout of start.
HandshakeTrace run_handshake(NetemPath& up, NetemPath& down, std::uint32_t session_id,
                             std::uint32_t node_id, Micros start, Micros timeout = 2'000'000);

struct TraceEvent {
  Micros time = 0;
  std::string kind;
  std::uint32_t client_id = 0;
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::string detail;
};

struct ClientSummary {
  std::uint32_t client_id = 0;
  bool local = false;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t frames_in_flight = 0;
  std::uint64_t host_skipped = 0;
  std::uint64_t delivered_bits = 0;
  std::uint64_t inputs_at_host = 0;
  std::uint64_t syncs_received = 0;
  std::uint64_t rtt_samples = 0;
  int final_level = 0;
  /// Simulated time spent at each ladder level.
  std::vector<Micros> level_time;
};

struct SessionResult {
  RunTrace trace;
  std::vector<TraceEvent> events;
  std::vector<ClientSummary> clients;
  std::vector<std::string> path_names;
  std::vector<PathCounters> path_counters;
  /// client_id -> indices (into path_names) of the first hop its frame
  /// fragments were submitted to.
  std::map<std::uint32_t, std::set<std::size_t>> frame_first_hop;
  std::vector<HandshakeTrace> handshakes;
  Micros start_time = 0;
  std::optional<Micros> first_session_packet;
  std::uint64_t integrity_errors = 0;
  std::uint64_t cache_hits = 0;
};

/// Runs one multi-user session on a single deterministic event loop:
/// clients send INPUT upstream at input_interval, the host renders each
/// client's frames at its level's fps and streams them fragmented, PING
/// probes run every ping_interval over a dedicated probe path pair with the
/// client's profile, and STATE_SYNC is broadcast at sync_hz.
SessionResult run_session(const SessionTopology& topology, const Ladder& ladder, Micros duration,
                          const SessionSettings& settings, std::uint64_t seed);

}  // namespace epicsim
