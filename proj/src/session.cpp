#include "epicsim/session.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <tuple>

#include "epicsim/log.hpp"
#include "epicsim/renderfarm.hpp"
#include "epicsim/rng.hpp"

namespace epicsim {

const char* to_string(HostingMode mode) {
  return mode == HostingMode::edge_hosted ? "edge_hosted" : "client_hosted";
}

void validate(const SessionTopology& topology, const Ladder& ladder) {
  validate_ladder(ladder);
  if (topology.clients.empty()) throw ValidationError("topology: no clients");
  std::set<std::uint32_t> ids;
  for (const auto& c : topology.clients) {
    if (!ids.insert(c.client_id).second) {
      throw ValidationError("topology: duplicate client id " + std::to_string(c.client_id));
    }
    validate(c.profile);
    validate(c.power);
    if (c.decode_throughput == 0) throw ValidationError("topology: decode_throughput must be > 0");
    if (c.start_level < 0 || c.start_level >= static_cast<int>(ladder.size())) {
      throw ValidationError("topology: start_level outside the ladder");
    }
    if (!(c.scene_complexity >= 0.1)) {
      throw ValidationError("topology: scene_complexity must be >= 0.1");
    }
    for (const auto& step : c.bandwidth_schedule) {
      if (step.at < 0 || step.bandwidth == 0) {
        throw ValidationError("topology: bad bandwidth step");
      }
    }
  }
  if (topology.mode == HostingMode::edge_hosted) {
    if (!topology.host_node) throw ValidationError("topology: edge_hosted requires a host node");
    validate(*topology.host_node);
  } else {
    if (!ids.contains(topology.master_client_id)) {
      throw ValidationError("topology: master client is not among the clients");
    }
    if (!topology.master_uplink) {
      throw ValidationError("topology: client_hosted requires a master uplink");
    }
    validate(*topology.master_uplink);
  }
}

void validate(const SessionSettings& s) {
  if (s.input_interval <= 0 || s.ping_interval <= 0) {
    throw ValidationError("session: input and ping intervals must be > 0");
  }
  if (s.render_ahead != 0 && s.render_ahead != 1) {
    throw ValidationError("session: render_ahead must be 0 or 1");
  }
  if (s.device_pixel_throughput == 0 || s.device_encode_throughput == 0) {
    throw ValidationError("session: device throughputs must be > 0");
  }
  if (s.handshake_timeout <= 0) throw ValidationError("session: handshake_timeout must be > 0");
  validate(s.controller);
}

HandshakeTrace run_handshake(NetemPath& up, NetemPath& down, std::uint32_t session_id,
                             std::uint32_t node_id, Micros start, Micros timeout) {
  constexpr Micros kRetry = 250'000;
  HandshakeTrace trace;
  trace.session_id = session_id;
  std::uint32_t client_seq = 0;
  std::uint32_t host_seq = 0;

  auto send = [&](NetemPath& path, bool upstream, ControlSubtype subtype, Micros now) {
    WireHeader h{MsgType::control, 0, session_id, upstream ? client_seq++ : host_seq++,
                 static_cast<std::uint64_t>(now)};
    const auto body = encode_control({subtype, node_id});
    const auto r = path.submit(Packet{encode_message(h, body), now}, now);
    HandshakeStep step{subtype, upstream, now, std::nullopt};
    if (r.outcome == SubmitOutcome::scheduled) step.arrival = r.delivery_time;
    trace.steps.push_back(step);
  };

  // Client side walks DISCOVER -> DEPLOY; the host answers each request it sees.
  ControlSubtype pending_request = ControlSubtype::discover;
  ControlSubtype awaiting = ControlSubtype::offer;
  Micros last_request = start;
  send(up, true, pending_request, start);

  const Micros deadline = start + timeout;
  while (true) {
    Micros t = last_request + kRetry;
    if (auto d = up.next_delivery()) t = std::min(t, *d);
    if (auto d = down.next_delivery()) t = std::min(t, *d);
    if (t > deadline) {
      throw HandshakeTimeout("handshake: no READY within " + std::to_string(timeout) +
                             " us for session " + std::to_string(session_id));
    }

    for (auto& d : up.advance_to(t)) {
      const Message msg = decode_message(d.packet.bytes);
      if (msg.header.type != MsgType::control) continue;
      const ControlBody body = decode_control(msg.payload);
      if (body.subtype == ControlSubtype::discover) {
        if (trace.accepted.empty()) trace.accepted.emplace_back(body.subtype, d.arrival);
        send(down, false, ControlSubtype::offer, t);
      } else if (body.subtype == ControlSubtype::deploy) {
        if (trace.accepted.size() == 2) trace.accepted.emplace_back(body.subtype, d.arrival);
        send(down, false, ControlSubtype::ready, t);
      }
    }
    for (auto& d : down.advance_to(t)) {
      const Message msg = decode_message(d.packet.bytes);
      if (msg.header.type != MsgType::control) continue;
      const ControlBody body = decode_control(msg.payload);
      if (body.subtype != awaiting) continue;
      trace.accepted.emplace_back(body.subtype, d.arrival);
      if (awaiting == ControlSubtype::ready) {
        trace.ready_at = d.arrival;
        return trace;
      }
      pending_request = ControlSubtype::deploy;
      awaiting = ControlSubtype::ready;
      last_request = t;
      send(up, true, pending_request, t);
    }
    if (t >= last_request + kRetry) {
      last_request = t;
      send(up, true, pending_request, t);
    }
  }
}

namespace {

constexpr std::size_t kDescriptorSize = 16;
constexpr std::uint64_t kSec = 1'000'000;

enum class Ev : std::uint8_t {
  path_delivery,
  input_tick,
  frame_tick,
  render_done,
  ping_tick,
  sync_tick,
  window_tick,
  bandwidth_step,
  drop_mark,
};

struct Event {
  Micros time;
  std::uint64_t seq;
  Ev kind;
  std::uint32_t a;
  std::uint64_t b;
};

struct Later {
  bool operator()(const Event& x, const Event& y) const {
    return std::tie(x.time, x.seq) > std::tie(y.time, y.seq);
  }
};

enum class PathRole { up, down, probe_up, probe_down, egress };

struct PathSlot {
  std::string name;
  PathRole role;
  std::size_t client;  // index into clients; unused for egress
  NetemPath path;
  Micros scheduled_until = -1;
};

struct RenderJob {
  std::size_t client;
  std::uint32_t frame_id;
  int level;
  Micros input_ts;
  bool prerender;
};

// A frame tick waiting for the host pipeline.
struct Waiting {
  Micros tick;
  int level;
  Micros input_ts;
};

struct Prerender {
  std::uint32_t frame_id;
  int level;
  Micros input_ts;
  bool ready = false;
  bool claimed = false;
};

struct Dispersion {
  Micros first = 0;
  Micros last = 0;
  std::uint64_t bytes_after_first = 0;
};

struct ClientRt {
  ClientSpec spec;
  bool local = false;
  int level = 0;
  ControllerState ctl;
  std::size_t up = 0, down = 0, probe_up = 0, probe_down = 0;
  std::uint32_t next_frame_id = 1;
  Micros tick_base = 0;
  std::uint64_t tick_k = 0;
  std::uint32_t tick_fps = 0;
  Micros latest_input = -1;
  std::uint32_t host_seq[8] = {};
  std::uint32_t client_seq[8] = {};
  Reassembler reasm;
  RttEstimator rtt;
  std::map<std::uint32_t, Micros> frame_input;
  std::map<std::uint32_t, Dispersion> dispersion;
  std::optional<Waiting> waiting;
  std::optional<Prerender> ahead;
  Micros last_served = -1;
  ClientSummary summary;
  std::vector<std::uint64_t> bits_per_second;
  std::uint64_t w_delivered = 0, w_dropped = 0, w_bits = 0;
  std::vector<double> w_capacity;
  Micros level_since = 0;
};

void put_u32(std::vector<std::uint8_t>& out, std::size_t at, std::uint32_t v) {
  out[at] = static_cast<std::uint8_t>(v >> 24);
  out[at + 1] = static_cast<std::uint8_t>(v >> 16);
  out[at + 2] = static_cast<std::uint8_t>(v >> 8);
  out[at + 3] = static_cast<std::uint8_t>(v);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | p[3];
}

class SessionSim {
 public:
  SessionSim(const SessionTopology& topo, const Ladder& ladder, Micros duration,
             const SessionSettings& settings, std::uint64_t seed)
      : topo_(topo), ladder_(ladder), duration_(duration), settings_(settings), seed_(seed),
        path_seeds_(seed) {
    render_seed_ = mix_seed(seed, 0x52454E44);
    if (topo.mode == HostingMode::edge_hosted) {
      host_ = *topo.host_node;
    } else {
      host_.node_id = topo.master_client_id;
      host_.pixel_throughput = settings.device_pixel_throughput;
      host_.encode_throughput = settings.device_encode_throughput;
      host_.max_sessions = static_cast<std::uint32_t>(topo.clients.size());
    }
    const std::uint64_t sessions = host_.active_sessions + topo.clients.size();
    if (sessions > host_.max_sessions) {
      throw CapacityError("session: node " + std::to_string(host_.node_id) + " over capacity (" +
                          std::to_string(sessions) + " sessions > " +
                          std::to_string(host_.max_sessions) + ")");
    }
    host_.active_sessions = static_cast<std::uint32_t>(sessions);

    if (topo.mode == HostingMode::edge_hosted && host_.egress) {
      egress_ = add_path("egress", PathRole::egress, 0, *host_.egress);
    } else if (topo.mode == HostingMode::client_hosted) {
      egress_ = add_path("master_uplink", PathRole::egress, 0, *topo.master_uplink);
    }
    for (std::size_t i = 0; i < topo.clients.size(); ++i) {
      ClientRt c;
      c.spec = topo.clients[i];
      c.local = topo.mode == HostingMode::client_hosted && c.spec.client_id == topo.master_client_id;
      c.level = c.spec.start_level;
      c.ctl.level = c.level;
      c.summary.client_id = c.spec.client_id;
      c.summary.local = c.local;
      c.summary.level_time.assign(ladder.size(), 0);
      clients_.push_back(std::move(c));
      ClientRt& cr = clients_.back();
      if (cr.local) continue;
      const std::string id = std::to_string(cr.spec.client_id);
      cr.up = add_path("up:" + id, PathRole::up, i, cr.spec.profile);
      cr.down = add_path("down:" + id, PathRole::down, i, cr.spec.profile);
      cr.probe_up = add_path("probe-up:" + id, PathRole::probe_up, i, cr.spec.profile);
      cr.probe_down = add_path("probe-down:" + id, PathRole::probe_down, i, cr.spec.profile);
    }
  }

  SessionResult run() {
    Micros start = 0;
    if (settings_.handshake) {
      for (auto& c : clients_) {
        if (c.local) continue;
        auto hs = run_handshake(paths_[c.up].path, paths_[c.down].path, c.spec.client_id,
                                host_.node_id, 0, settings_.handshake_timeout);
        for (const auto& [subtype, at] : hs.accepted) {
          event(at, "handshake", c.spec.client_id, 0, 0, to_string(subtype));
        }
        start = std::max(start, hs.ready_at);
        result_.handshakes.push_back(std::move(hs));
      }
    }
    start_ = start;
    end_ = start + duration_;
    result_.start_time = start;
    event(start, "session_start", 0, static_cast<std::int64_t>(clients_.size()), 0,
          to_string(topo_.mode));

    const std::size_t seconds = static_cast<std::size_t>((duration_ + kSec - 1) / kSec);
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      ClientRt& c = clients_[i];
      c.bits_per_second.assign(seconds, 0);
      c.tick_base = start;
      c.tick_fps = ladder_[c.level].fps();
      c.level_since = start;
      push(start, Ev::input_tick, i);
      push(start, Ev::frame_tick, i);
      if (!c.local) push(start, Ev::ping_tick, i);
      for (std::size_t s = 0; s < c.spec.bandwidth_schedule.size(); ++s) {
        push(start + c.spec.bandwidth_schedule[s].at, Ev::bandwidth_step, i, s);
      }
    }
    if (settings_.sync_hz > 0) push(start, Ev::sync_tick, 0);
    push(start + settings_.controller.window, Ev::window_tick, 0);
    push(start + duration_ * 3 / 4, Ev::drop_mark, 0);

    while (!queue_.empty() && queue_.top().time < end_) {
      const Event ev = queue_.top();
      queue_.pop();
      dispatch(ev);
    }
    return finish();
  }

 private:
  std::size_t add_path(std::string name, PathRole role, std::size_t client,
                       const NetworkProfile& profile) {
    paths_.push_back(PathSlot{std::move(name), role, client, NetemPath(profile, path_seeds_.next())});
    return paths_.size() - 1;
  }

  void push(Micros t, Ev kind, std::size_t a, std::uint64_t b = 0) {
    queue_.push(Event{t, next_seq_++, kind, static_cast<std::uint32_t>(a), b});
  }

  void event(Micros t, std::string kind, std::uint32_t client, std::int64_t a, std::int64_t b,
             std::string detail = {}) {
    if (log_level() >= LogLevel::events) {
      std::ostringstream os;
      os << t << " " << kind << " client=" << client << " a=" << a << " b=" << b;
      if (!detail.empty()) os << " " << detail;
      log_line(LogLevel::events, os.str());
    }
    result_.events.push_back(TraceEvent{t, std::move(kind), client, a, b, std::move(detail)});
  }

  void submit(std::size_t p, std::vector<std::uint8_t> bytes, Micros now) {
    if (!result_.first_session_packet) result_.first_session_packet = now;
    PathSlot& slot = paths_[p];
    const auto r = slot.path.submit(Packet{std::move(bytes), now}, now);
    if (log_level() >= LogLevel::packets) {
      std::ostringstream os;
      os << now << " submit " << slot.name << " outcome=" << static_cast<int>(r.outcome)
         << " arrival=" << r.delivery_time;
      log_line(LogLevel::packets, os.str());
    }
    if (r.outcome == SubmitOutcome::scheduled && r.delivery_time > slot.scheduled_until) {
      slot.scheduled_until = r.delivery_time;
      push(r.delivery_time, Ev::path_delivery, p);
    }
  }

  WireHeader host_header(ClientRt& c, MsgType type, Micros now, std::uint32_t count = 1) {
    auto& seq = c.host_seq[static_cast<int>(type)];
    WireHeader h{type, 0, c.spec.client_id, seq, static_cast<std::uint64_t>(now)};
    seq += count;
    return h;
  }

  WireHeader client_header(ClientRt& c, MsgType type, Micros now) {
    auto& seq = c.client_seq[static_cast<int>(type)];
    return WireHeader{type, 0, c.spec.client_id, seq++, static_cast<std::uint64_t>(now)};
  }

  std::size_t downstream_first_hop(const ClientRt& c) const {
    return egress_ ? *egress_ : c.down;
  }

  std::size_t fragment_mtu(const ClientRt& c) const {
    std::size_t mtu = paths_[c.down].path.profile().mtu;
    if (egress_) mtu = std::min<std::size_t>(mtu, paths_[*egress_].path.profile().mtu);
    return mtu;
  }

  Micros frame_interval(const ClientRt& c) const {
    return static_cast<Micros>(kSec / ladder_[c.level].fps());
  }

  Micros job_cost(const ClientRt& c, int level) const {
    const QualityLevel& q = ladder_[level];
    return render_time(q.pixels(), c.spec.scene_complexity, host_.pixel_throughput) +
           codec_time(q.pixels(), host_.encode_throughput);
  }

  RenderedFrame produce(const ClientRt& c, std::uint32_t frame_id, int level) {
    RenderRequest req{frame_id, ladder_[level], c.spec.scene_complexity, c.spec.client_id};
    return render(req, host_, render_seed_);
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case Ev::path_delivery: on_path_delivery(ev.a, ev.time); break;
      case Ev::input_tick: on_input_tick(clients_[ev.a], ev.a, ev.time); break;
      case Ev::frame_tick: on_frame_tick(ev.a, ev.time); break;
      case Ev::render_done: on_render_done(ev.time); break;
      case Ev::ping_tick: on_ping_tick(ev.a, ev.time); break;
      case Ev::sync_tick: on_sync_tick(ev.time); break;
      case Ev::window_tick: on_window_tick(ev.time); break;
      case Ev::bandwidth_step: on_bandwidth_step(ev.a, ev.b, ev.time); break;
      case Ev::drop_mark: result_.trace.queue_drops_at_mark = total_queue_drops(); break;
    }
  }

  void on_input_tick(ClientRt& c, std::size_t i, Micros t) {
    if (c.local) {
      c.latest_input = t;
      ++c.summary.inputs_at_host;
    } else {
      // Synthetic head motion: slow circle, identity orientation.
      InputEvent in;
      in.timestamp = t;
      const double phase = static_cast<double>(t) * 1e-6;
      in.position = {static_cast<float>(std::cos(phase)), 1.6f, static_cast<float>(std::sin(phase))};
      in.buttons = static_cast<std::uint32_t>((t / kSec) & 1);
      submit(c.up, encode_message(client_header(c, MsgType::input, t), encode_input(in)), t);
    }
    push(t + settings_.input_interval, Ev::input_tick, i);
  }

  void on_ping_tick(std::size_t i, Micros t) {
    ClientRt& c = clients_[i];
    submit(c.probe_up, encode_message(client_header(c, MsgType::ping, t), {}), t);
    push(t + settings_.ping_interval, Ev::ping_tick, i);
  }

  void on_sync_tick(Micros t) {
    const std::vector<std::uint8_t> body(settings_.sync_bytes, 0);
    for (auto& c : clients_) {
      if (c.local) continue;
      submit(downstream_first_hop(c), encode_message(host_header(c, MsgType::state_sync, t), body), t);
    }
    push(t + static_cast<Micros>(kSec / settings_.sync_hz), Ev::sync_tick, 0);
  }

  void on_bandwidth_step(std::size_t i, std::uint64_t step, Micros t) {
    ClientRt& c = clients_[i];
    const std::uint64_t bw = c.spec.bandwidth_schedule[step].bandwidth;
    if (!c.local) {
      for (std::size_t p : {c.up, c.down, c.probe_up, c.probe_down}) paths_[p].path.set_bandwidth(bw);
    }
    event(t, "bandwidth_step", c.spec.client_id, static_cast<std::int64_t>(bw), 0);
  }

  // Host pipeline: one job at a time. Each client holds at most one waiting
  // tick (a newer tick supersedes it) and the pipeline serves the waiting
  // client it served least recently. A tick that waited longer than one
  // frame interval is skipped and counts as a dropped frame.
  void on_frame_tick(std::size_t i, Micros t) {
    ClientRt& c = clients_[i];
    ++c.summary.frames_sent;
    const Micros input_ts = c.latest_input >= 0 ? c.latest_input : t;

    if (c.ahead && c.ahead->level == c.level) {
      const std::uint32_t id = c.next_frame_id++;
      if (c.ahead->ready) {
        const Prerender pre = *c.ahead;
        c.ahead.reset();
        emit(c, id, pre.level, pre.input_ts, t, true);
      } else {
        c.ahead->claimed = true;
      }
    } else {
      c.ahead.reset();
      if (c.waiting) skip(c, c.waiting->tick);
      c.waiting = Waiting{t, c.level, input_ts};
      if (!running_) start_next(t, std::nullopt);
    }

    // Next tick; rebase the schedule when the level changed fps.
    const std::uint32_t fps = ladder_[c.level].fps();
    if (fps != c.tick_fps) {
      c.tick_fps = fps;
      c.tick_base = t;
      c.tick_k = 0;
    }
    ++c.tick_k;
    push(c.tick_base + static_cast<Micros>(c.tick_k * kSec / c.tick_fps), Ev::frame_tick, i);
  }

  void skip(ClientRt& c, Micros tick) {
    ++c.summary.host_skipped;
    count_dropped(c, 1);
    event(tick, "frame_skipped", c.spec.client_id, 0, c.level);
  }

  void start_next(Micros now, std::optional<std::size_t> just_served) {
    std::optional<std::size_t> pick;
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      ClientRt& c = clients_[i];
      if (!c.waiting) continue;
      const auto interval = static_cast<Micros>(kSec / ladder_[c.waiting->level].fps());
      if (now - c.waiting->tick > interval) {
        skip(c, c.waiting->tick);
        c.waiting.reset();
        continue;
      }
      if (!pick || c.last_served < clients_[*pick].last_served) pick = i;
    }
    if (pick) {
      ClientRt& c = clients_[*pick];
      const Waiting w = *c.waiting;
      c.waiting.reset();
      c.last_served = now;
      running_ = RenderJob{*pick, c.next_frame_id++, w.level, w.input_ts, false};
      push(now + job_cost(c, w.level), Ev::render_done, *pick);
      return;
    }
    // Idle pipeline: prerender the next frame of the client just served.
    if (settings_.render_ahead == 1 && just_served) {
      ClientRt& c = clients_[*just_served];
      if (c.ahead) return;
      const Micros input_ts = c.latest_input >= 0 ? c.latest_input : now;
      c.ahead = Prerender{c.next_frame_id, c.level, input_ts};
      running_ = RenderJob{*just_served, c.next_frame_id, c.level, input_ts, true};
      push(now + job_cost(c, c.level), Ev::render_done, *just_served);
    }
  }

  void on_render_done(Micros t) {
    const RenderJob job = *running_;
    running_.reset();
    ClientRt& c = clients_[job.client];
    if (!job.prerender) {
      emit(c, job.frame_id, job.level, job.input_ts, t, false);
    } else if (c.ahead && c.ahead->frame_id == job.frame_id && c.ahead->level == job.level) {
      cache_.insert(c.spec.client_id, produce(c, job.frame_id, job.level));
      c.ahead->ready = true;
      if (c.ahead->claimed) {
        c.ahead.reset();
        emit(c, job.frame_id, job.level, job.input_ts, t, true);
      }
    }
    start_next(t, job.client);
  }

  void emit(ClientRt& c, std::uint32_t frame_id, int level, Micros input_ts, Micros t,
            bool cached) {
    std::optional<RenderedFrame> frame;
    if (cached) frame = cache_.lookup(c.spec.client_id, frame_id, level);
    if (!frame) frame = produce(c, frame_id, level);
    cache_.evict_before(c.spec.client_id, frame_id + 1);
    if (c.local) {
      present(c, frame_id, frame->meta.payload_size, t, t, t - input_ts);
    } else {
      transmit(c, *frame, input_ts, t);
    }
  }

  void transmit(ClientRt& c, const RenderedFrame& frame, Micros input_ts, Micros t) {
    // Frame blob: 16-byte descriptor, then the encoded payload.
    std::vector<std::uint8_t> blob(kDescriptorSize + frame.payload->size(), 0);
    blob[0] = static_cast<std::uint8_t>(frame.meta.level_index);
    put_u32(blob, 4, frame.meta.checksum);
    put_u32(blob, 8, static_cast<std::uint32_t>(frame.meta.render_time));
    put_u32(blob, 12, static_cast<std::uint32_t>(frame.meta.encode_time));
    std::copy(frame.payload->begin(), frame.payload->end(), blob.begin() + kDescriptorSize);

    const std::size_t mtu = fragment_mtu(c);
    const std::size_t count = (blob.size() + fragment_capacity(mtu) - 1) / fragment_capacity(mtu);
    const WireHeader h = host_header(c, MsgType::frame_frag, t, static_cast<std::uint32_t>(count));
    const std::size_t hop = downstream_first_hop(c);
    result_.frame_first_hop[c.spec.client_id].insert(hop);
    c.frame_input[frame.meta.frame_id] = input_ts;
    for (const auto& frag : fragment(frame.meta.frame_id, blob, mtu, h)) {
      submit(hop, encode_fragment(frag), t);
    }
    event(t, "frame_sent", c.spec.client_id, frame.meta.frame_id, frame.meta.level_index);
  }

  void on_path_delivery(std::size_t p, Micros t) {
    for (auto& d : paths_[p].path.advance_to(t)) {
      const PathRole role = paths_[p].role;
      const Message msg = decode_message(d.packet.bytes);
      if (role == PathRole::egress) {
        ClientRt* c = client_by_id(msg.header.session_id);
        if (c != nullptr) submit(c->down, std::move(d.packet.bytes), t);
        continue;
      }
      ClientRt& c = clients_[paths_[p].client];
      switch (role) {
        case PathRole::up:
          if (msg.header.type == MsgType::input) {
            decode_input(msg.payload, static_cast<Micros>(msg.header.timestamp));
            c.latest_input = std::max(c.latest_input, static_cast<Micros>(msg.header.timestamp));
            ++c.summary.inputs_at_host;
          }
          break;
        case PathRole::probe_up:
          if (msg.header.type == MsgType::ping) {
            WireHeader h = msg.header;
            h.type = MsgType::pong;
            submit(c.probe_down, encode_message(h, {}), t);
          }
          break;
        case PathRole::probe_down:
          if (msg.header.type == MsgType::pong) {
            const Micros rtt = t - static_cast<Micros>(msg.header.timestamp);
            c.rtt.update(rtt);
            ++c.summary.rtt_samples;
            result_.trace.rtt_samples.push_back(rtt);
          }
          break;
        case PathRole::down:
          if (msg.header.type == MsgType::frame_frag) {
            on_fragment(c, decode_fragment(msg), d.packet.size(), t);
          } else if (msg.header.type == MsgType::state_sync) {
            ++c.summary.syncs_received;
          }
          break;
        case PathRole::egress: break;
      }
    }
  }

  ClientRt* client_by_id(std::uint32_t id) {
    for (auto& c : clients_) {
      if (c.spec.client_id == id) return &c;
    }
    return nullptr;
  }

  void count_dropped(ClientRt& c, std::uint64_t n) {
    c.summary.frames_dropped += n;
    c.w_dropped += n;
  }

  void on_fragment(ClientRt& c, const FrameFragment& frag, std::size_t wire_size, Micros t) {
    const auto expired = c.reasm.expire(t);
    if (!expired.empty()) {
      count_dropped(c, expired.size());
      for (auto id : expired) event(t, "frame_dropped", c.spec.client_id, id, 0, "timeout");
    }

    const auto r = c.reasm.offer(frag, t);
    if (r.status == Reassembler::Result::Status::stale ||
        r.status == Reassembler::Result::Status::duplicate) {
      return;
    }
    auto [dit, fresh] = c.dispersion.try_emplace(frag.frame_id);
    Dispersion& disp = dit->second;
    if (fresh) {
      disp.first = t;
    } else {
      disp.bytes_after_first += wire_size;
    }
    disp.last = t;
    if (r.status != Reassembler::Result::Status::complete) return;

    if (r.abandoned > 0) {
      count_dropped(c, r.abandoned);
      event(t, "frame_dropped", c.spec.client_id, r.frame_id, static_cast<std::int64_t>(r.abandoned),
            "superseded");
    }
    if (disp.last > disp.first && disp.bytes_after_first > 0) {
      c.w_capacity.push_back(static_cast<double>(disp.bytes_after_first) * 8e6 /
                             static_cast<double>(disp.last - disp.first));
    }
    c.dispersion.erase(c.dispersion.begin(), c.dispersion.upper_bound(r.frame_id));

    Micros input_ts = t;
    if (auto it = c.frame_input.find(r.frame_id); it != c.frame_input.end()) input_ts = it->second;
    c.frame_input.erase(c.frame_input.begin(), c.frame_input.upper_bound(r.frame_id));

    const auto& blob = r.payload;
    if (blob.size() < kDescriptorSize) {
      ++result_.integrity_errors;
      count_dropped(c, 1);
      return;
    }
    FrameMeta meta;
    meta.frame_id = r.frame_id;
    meta.level_index = blob[0];
    meta.checksum = get_u32(&blob[4]);
    meta.render_time = get_u32(&blob[8]);
    meta.encode_time = get_u32(&blob[12]);
    meta.payload_size = blob.size() - kDescriptorSize;
    try {
      if (meta.level_index >= static_cast<int>(ladder_.size())) {
        throw IntegrityError("frame references an unknown level");
      }
      const QualityLevel& level = ladder_[meta.level_index];
      FrameMeta expected = meta;
      expected.payload_size = frame_bytes(level);
      const Micros decode =
          decode_check(expected, std::span(blob).subspan(kDescriptorSize), level,
                       c.spec.decode_throughput);
      present(c, r.frame_id, meta.payload_size, t, t + decode, t + decode - input_ts);
    } catch (const IntegrityError& e) {
      ++result_.integrity_errors;
      count_dropped(c, 1);
      event(t, "frame_dropped", c.spec.client_id, r.frame_id, 0, e.what());
    }
  }

  void present(ClientRt& c, std::uint32_t frame_id, std::uint64_t payload_bytes, Micros completed,
               Micros presented, Micros motion_to_photon) {
    ++c.summary.frames_delivered;
    ++c.w_delivered;
    const std::uint64_t bits = payload_bytes * 8;
    c.w_bits += bits;
    c.summary.delivered_bits += bits;
    const auto sec = static_cast<std::size_t>((completed - start_) / static_cast<Micros>(kSec));
    if (sec < c.bits_per_second.size()) c.bits_per_second[sec] += bits;
    result_.trace.motion_to_photon.push_back(motion_to_photon);
    event(presented, "frame_presented", c.spec.client_id, frame_id, motion_to_photon);
  }

  void on_window_tick(Micros t) {
    const std::uint64_t index = window_index_++;
    const ControllerParams& p = settings_.controller;
    for (auto& c : clients_) {
      if (settings_.adaptation && !c.local) {
        WindowStats w;
        w.window_index = index;
        w.srtt = c.rtt.srtt().value_or(0);
        const std::uint64_t resolved = c.w_delivered + c.w_dropped;
        w.frame_loss_rate =
            resolved == 0 ? 0.0 : static_cast<double>(c.w_dropped) / static_cast<double>(resolved);
        w.delivered_throughput = c.w_bits * kSec / static_cast<std::uint64_t>(p.window);
        w.current_level = c.level;
        const auto verdict = detect_bottleneck(w, bitrate(ladder_[c.level]), p);

        bool upgrade_ok = true;
        if (p.capacity_gate && c.level > 0 && !c.w_capacity.empty()) {
          auto caps = c.w_capacity;
          std::nth_element(caps.begin(), caps.begin() + caps.size() / 2, caps.end());
          const double capacity = caps[caps.size() / 2];
          upgrade_ok = capacity * p.throughput_factor >=
                       static_cast<double>(bitrate(ladder_[c.level - 1]));
        }
        const ControllerState next = controller_step(c.ctl, static_cast<bool>(verdict), p,
                                                     static_cast<int>(ladder_.size()), upgrade_ok);
        if (next.level != c.level) {
          LevelChange change{t, c.spec.client_id, index, c.level, next.level,
                             next.level > c.level ? verdict.cause() : std::string("recovered")};
          event(t, "level_change", c.spec.client_id, c.level, next.level, change.cause);
          result_.trace.level_timeline.push_back(std::move(change));
          c.summary.level_time[c.level] += t - c.level_since;
          c.level_since = t;
          c.level = next.level;
        }
        c.ctl = next;
      }
      c.w_delivered = c.w_dropped = c.w_bits = 0;
      c.w_capacity.clear();
    }
    push(t + p.window, Ev::window_tick, 0);
  }

  std::uint64_t total_queue_drops() const {
    std::uint64_t n = 0;
    for (const auto& s : paths_) n += s.path.counters().dropped_queue;
    return n;
  }

  SessionResult finish() {
    RunTrace& trace = result_.trace;
    trace.duration = duration_;
    for (auto& c : clients_) {
      if (!c.local) {
        const auto expired = c.reasm.expire(end_);
        count_dropped(c, expired.size());
      }
      c.summary.level_time[c.level] += end_ - c.level_since;
      c.summary.final_level = c.level;
      c.summary.frames_in_flight =
          c.summary.frames_sent - c.summary.frames_delivered - c.summary.frames_dropped;
      trace.frames_sent += c.summary.frames_sent;
      trace.frames_delivered += c.summary.frames_delivered;
      trace.frames_dropped += c.summary.frames_dropped;
      trace.frames_in_flight += c.summary.frames_in_flight;
      trace.delivered_bits.push_back(c.bits_per_second);
      result_.clients.push_back(c.summary);
    }
    for (const auto& s : paths_) {
      result_.path_names.push_back(s.name);
      result_.path_counters.push_back(s.path.counters());
      trace.packets_dropped_loss += s.path.counters().dropped_loss;
      trace.packets_dropped_queue += s.path.counters().dropped_queue;
    }
    trace.queue_drops_at_end = total_queue_drops();
    // Presentation events are recorded when scheduled, ahead of the clock.
    std::stable_sort(result_.events.begin(), result_.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.time < b.time; });
    result_.cache_hits = cache_.hits();
    return std::move(result_);
  }

  const SessionTopology& topo_;
  const Ladder& ladder_;
  Micros duration_;
  const SessionSettings& settings_;
  std::uint64_t seed_;
  SplitMix64 path_seeds_;
  std::uint64_t render_seed_ = 0;
  NodeSpec host_;
  std::vector<PathSlot> paths_;
  std::optional<std::size_t> egress_;
  std::vector<ClientRt> clients_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::optional<RenderJob> running_;
  FrameCache cache_;
  std::uint64_t window_index_ = 0;
  Micros start_ = 0;
  Micros end_ = 0;
  SessionResult result_;
};

}  // namespace

SessionResult run_session(const SessionTopology& topology, const Ladder& ladder, Micros duration,
                          const SessionSettings& settings, std::uint64_t seed) {
  validate(topology, ladder);
  validate(settings);
  if (duration < static_cast<Micros>(kSec)) {
    throw ValidationError("session: duration must be at least 1 s");
  }
  SessionSim sim(topology, ladder, duration, settings, seed);
  return sim.run();
}

}  // namespace epicsim
