#include "epicsim/transport.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>

namespace epicsim {

namespace {

constexpr std::uint8_t kMagic[4] = {0x45, 0x50, 0x49, 0x43};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(std::uint16_t{p[0]} << 8 | p[1]);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} << 24 | std::uint32_t{p[1]} << 16 | std::uint32_t{p[2]} << 8 | p[3];
}

std::uint64_t get_u64(const std::uint8_t* p) {
  return std::uint64_t{get_u32(p)} << 32 | get_u32(p + 4);
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

void check_payload_length(MsgType type, std::size_t n) {
  bool ok = true;
  switch (type) {
    case MsgType::input: ok = n == kInputPayloadSize; break;
    case MsgType::frame_frag: ok = n > kFragmentHeaderSize; break;
    case MsgType::ping:
    case MsgType::pong: ok = n == 0; break;
    case MsgType::state_sync: ok = true; break;
    case MsgType::control: ok = n == kControlPayloadSize; break;
  }
  if (!ok) {
    throw DecodeError(std::string("bad length: ") + std::to_string(n) + " B payload for " +
                      to_string(type));
  }
}

}  // namespace

const char* to_string(MsgType type) {
  switch (type) {
    case MsgType::input: return "INPUT";
    case MsgType::frame_frag: return "FRAME_FRAG";
    case MsgType::ping: return "PING";
    case MsgType::pong: return "PONG";
    case MsgType::state_sync: return "STATE_SYNC";
    case MsgType::control: return "CONTROL";
  }
  return "?";
}

const char* to_string(ControlSubtype subtype) {
  switch (subtype) {
    case ControlSubtype::discover: return "DISCOVER";
    case ControlSubtype::offer: return "OFFER";
    case ControlSubtype::deploy: return "DEPLOY";
    case ControlSubtype::ready: return "READY";
    case ControlSubtype::frame_ack: return "FRAME_ACK";
  }
  return "?";
}

std::vector<std::uint8_t> encode_message(const WireHeader& header,
                                         std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + payload.size());
  for (std::uint8_t b : kMagic) out.push_back(b);
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(header.type));
  out.push_back(header.flags);
  out.push_back(0x00);
  put_u32(out, header.session_id);
  put_u32(out, header.sequence);
  put_u64(out, header.timestamp);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Message decode_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw DecodeError("truncated header");
  const std::uint8_t* p = bytes.data();
  if (!std::equal(std::begin(kMagic), std::end(kMagic), p)) throw DecodeError("bad magic");
  if (p[4] != kWireVersion) throw DecodeError("bad version");
  if (p[5] < 0x01 || p[5] > 0x06) throw DecodeError("unknown message type");
  if (p[7] != 0x00) throw DecodeError("reserved byte set");
  Message msg;
  msg.header.type = static_cast<MsgType>(p[5]);
  msg.header.flags = p[6];
  msg.header.session_id = get_u32(p + 8);
  msg.header.sequence = get_u32(p + 12);
  msg.header.timestamp = get_u64(p + 16);
  check_payload_length(msg.header.type, bytes.size() - kHeaderSize);
  msg.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return msg;
}

std::vector<std::uint8_t> encode_input(const InputEvent& event) {
  std::vector<std::uint8_t> out;
  out.reserve(kInputPayloadSize);
  for (float v : event.position) put_f32(out, v);
  for (float v : event.orientation) put_f32(out, v);
  put_u32(out, event.buttons);
  return out;
}

InputEvent decode_input(std::span<const std::uint8_t> payload, Micros timestamp) {
  if (payload.size() != kInputPayloadSize) throw DecodeError("bad length: INPUT payload");
  InputEvent ev;
  ev.timestamp = timestamp;
  const std::uint8_t* p = payload.data();
  for (auto& v : ev.position) { v = get_f32(p); p += 4; }
  for (auto& v : ev.orientation) { v = get_f32(p); p += 4; }
  ev.buttons = get_u32(p);
  return ev;
}

std::vector<std::uint8_t> encode_control(const ControlBody& body) {
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(body.subtype), 0, 0, 0};
  put_u32(out, body.argument);
  return out;
}

ControlBody decode_control(std::span<const std::uint8_t> payload) {
  if (payload.size() != kControlPayloadSize) throw DecodeError("bad length: CONTROL payload");
  if (payload[0] < 0x01 || payload[0] > 0x05) throw DecodeError("unknown control subtype");
  return {static_cast<ControlSubtype>(payload[0]), get_u32(payload.data() + 4)};
}

std::vector<FrameFragment> fragment(std::uint32_t frame_id, std::span<const std::uint8_t> payload,
                                    std::size_t mtu, const WireHeader& header) {
  if (payload.empty()) throw ValidationError("fragment: empty payload");
  if (mtu < 128) throw ValidationError("fragment: mtu must be >= 128");
  const std::size_t cap = fragment_capacity(mtu);
  const std::size_t count = (payload.size() + cap - 1) / cap;
  if (count > kMaxFragments) throw ValidationError("fragment: more than 65535 fragments");

  std::vector<FrameFragment> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    FrameFragment& f = out[i];
    f.header = header;
    f.header.type = MsgType::frame_frag;
    f.header.sequence = header.sequence + static_cast<std::uint32_t>(i);
    f.frame_id = frame_id;
    f.frag_index = static_cast<std::uint16_t>(i);
    f.frag_count = static_cast<std::uint16_t>(count);
    const std::size_t begin = i * cap;
    const std::size_t end = std::min(payload.size(), begin + cap);
    f.payload.assign(payload.begin() + begin, payload.begin() + end);
  }
  return out;
}

std::vector<std::uint8_t> encode_fragment(const FrameFragment& frag) {
  std::vector<std::uint8_t> body;
  body.reserve(kFragmentHeaderSize + frag.payload.size());
  put_u32(body, frag.frame_id);
  put_u16(body, frag.frag_index);
  put_u16(body, frag.frag_count);
  body.insert(body.end(), frag.payload.begin(), frag.payload.end());
  WireHeader h = frag.header;
  h.type = MsgType::frame_frag;
  return encode_message(h, body);
}

FrameFragment decode_fragment(const Message& msg) {
  if (msg.header.type != MsgType::frame_frag) throw DecodeError("not a FRAME_FRAG message");
  if (msg.payload.size() <= kFragmentHeaderSize) throw DecodeError("bad length: FRAME_FRAG");
  FrameFragment f;
  f.header = msg.header;
  const std::uint8_t* p = msg.payload.data();
  f.frame_id = get_u32(p);
  f.frag_index = get_u16(p + 4);
  f.frag_count = get_u16(p + 6);
  if (f.frag_count == 0 || f.frag_index >= f.frag_count) {
    throw DecodeError("fragment index out of range");
  }
  f.payload.assign(msg.payload.begin() + kFragmentHeaderSize, msg.payload.end());
  return f;
}

Reassembler::Reassembler(std::uint32_t first_frame_id, Micros timeout)
    : timeout_(timeout), watermark_(first_frame_id - 1) {}

Reassembler::Result Reassembler::offer(const FrameFragment& frag, Micros now) {
  using Status = Result::Status;
  Result r;
  r.frame_id = frag.frame_id;
  if (frag.frame_id <= watermark_ || timed_out_.contains(frag.frame_id)) {
    r.status = Status::stale;
    return r;
  }
  if (frag.frag_count == 0 || frag.frag_index >= frag.frag_count) {
    throw ValidationError("reassembly: fragment index out of range");
  }

  auto [it, inserted] = partial_.try_emplace(frag.frame_id);
  Partial& part = it->second;
  if (inserted) {
    part.frag_count = frag.frag_count;
    part.first_arrival = now;
    part.pieces.resize(frag.frag_count);
    part.have.assign(frag.frag_count, false);
  } else if (part.frag_count != frag.frag_count) {
    throw ValidationError("reassembly: inconsistent frag_count for frame " +
                          std::to_string(frag.frame_id));
  }
  r.first_arrival = part.first_arrival;
  if (part.have[frag.frag_index]) {
    r.status = Status::duplicate;
    return r;
  }
  part.have[frag.frag_index] = true;
  part.pieces[frag.frag_index] = frag.payload;
  part.bytes += frag.payload.size();
  if (++part.received < part.frag_count) {
    r.status = Status::pending;
    return r;
  }

  r.status = Status::complete;
  r.payload.reserve(part.bytes);
  for (auto& piece : part.pieces) r.payload.insert(r.payload.end(), piece.begin(), piece.end());

  const std::uint32_t id = frag.frame_id;
  std::uint64_t already = 0;
  for (auto t = timed_out_.begin(); t != timed_out_.end() && *t < id;) {
    ++already;
    t = timed_out_.erase(t);
  }
  r.abandoned = (id - watermark_ - 1) - already;
  partial_.erase(partial_.begin(), partial_.upper_bound(id));
  watermark_ = id;
  return r;
}

std::vector<std::uint32_t> Reassembler::expire(Micros now) {
  std::vector<std::uint32_t> out;
  for (auto it = partial_.begin(); it != partial_.end();) {
    if (now - it->second.first_arrival >= timeout_) {
      out.push_back(it->first);
      timed_out_.insert(it->first);
      it = partial_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

void RttEstimator::update(Micros sample) {
  if (sample <= 0) throw ValidationError("rtt: sample must be > 0");
  ++samples_;
  if (!srtt_) {
    srtt_ = sample;
    return;
  }
  srtt_ = (7 * *srtt_ + sample + 4) / 8;
}

}  // namespace epicsim
