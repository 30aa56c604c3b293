#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "epicsim/core_model.hpp"

namespace epicsim {

// Wire format: 24-byte big-endian header
//   magic "EPIC" | version 0x01 | msg_type | flags | reserved 0x00 |
//   session_id u32 | sequence u32 | timestamp u64 (us)
// followed by a type-specific payload. The datagram length delimits the payload.

inline constexpr std::size_t kHeaderSize = 24;
inline constexpr std::size_t kFragmentHeaderSize = 8;
inline constexpr std::size_t kInputPayloadSize = 32;
inline constexpr std::size_t kControlPayloadSize = 8;
inline constexpr std::uint8_t kWireVersion = 0x01;
inline constexpr std::uint32_t kMaxFragments = 65535;

enum class MsgType : std::uint8_t {
  input = 0x01,
  frame_frag = 0x02,
  ping = 0x03,
  pong = 0x04,
  state_sync = 0x05,
  control = 0x06,
};

enum class ControlSubtype : std::uint8_t {
  discover = 0x01,
  offer = 0x02,
  deploy = 0x03,
  ready = 0x04,
  frame_ack = 0x05,
};

const char* to_string(MsgType type);
const char* to_string(ControlSubtype subtype);

struct WireHeader {
  MsgType type = MsgType::ping;
  std::uint8_t flags = 0;
  std::uint32_t session_id = 0;
  std::uint32_t sequence = 0;
  std::uint64_t timestamp = 0;
  friend bool operator==(const WireHeader&, const WireHeader&) = default;
};

struct Message {
  WireHeader header;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Message&, const Message&) = default;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

std::vector<std::uint8_t> encode_message(const WireHeader& header,
                                         std::span<const std::uint8_t> payload);
/// Rejects bad magic/version/reserved, unknown types and payload lengths that
/// do not fit the message type.
Message decode_message(std::span<const std::uint8_t> bytes);

// INPUT payload: position 3 x f32, orientation 4 x f32, buttons u32, big-endian.
std::vector<std::uint8_t> encode_input(const InputEvent& event);
InputEvent decode_input(std::span<const std::uint8_t> payload, Micros timestamp);

// CONTROL payload: subtype u8, 3 reserved bytes, argument u32.
struct ControlBody {
  ControlSubtype subtype = ControlSubtype::discover;
  std::uint32_t argument = 0;
  friend bool operator==(const ControlBody&, const ControlBody&) = default;
};
std::vector<std::uint8_t> encode_control(const ControlBody& body);
ControlBody decode_control(std::span<const std::uint8_t> payload);

struct FrameFragment {
  WireHeader header;  // type frame_frag
  std::uint32_t frame_id = 0;
  std::uint16_t frag_index = 0;
  std::uint16_t frag_count = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const FrameFragment&, const FrameFragment&) = default;
};

inline std::size_t fragment_capacity(std::size_t mtu) {
  return mtu - kHeaderSize - kFragmentHeaderSize;
}

/// Splits a frame into wire-sized fragments. Fragment i carries sequence
/// header.sequence + i; the remaining header fields are copied.
std::vector<FrameFragment> fragment(std::uint32_t frame_id, std::span<const std::uint8_t> payload,
                                    std::size_t mtu, const WireHeader& header = {});
std::vector<std::uint8_t> encode_fragment(const FrameFragment& frag);
FrameFragment decode_fragment(const Message& msg);

/// Per-session reassembly with latest-wins presentation. Frame ids are
/// consecutive per session: completing frame N abandons every unresolved id
/// below N, including ids never seen.
class Reassembler {
 public:
  struct Result {
    enum class Status { pending, complete, duplicate, stale } status = Status::pending;
    std::uint32_t frame_id = 0;
    std::vector<std::uint8_t> payload;  // set when complete
    std::uint64_t abandoned = 0;        // ids resolved as dropped by this completion
    Micros first_arrival = 0;
  };

  explicit Reassembler(std::uint32_t first_frame_id = 1, Micros timeout = 250'000);

  Result offer(const FrameFragment& frag, Micros now);
  /// Abandons partial frames whose first fragment arrived timeout ago or more.
  std::vector<std::uint32_t> expire(Micros now);

  /// Highest completed frame id, or first_frame_id - 1 before any completion.
  std::uint32_t last_completed() const { return watermark_; }
  std::size_t pending() const { return partial_.size(); }

 private:
  struct Partial {
    std::uint16_t frag_count = 0;
    std::uint32_t received = 0;
    std::uint64_t bytes = 0;
    Micros first_arrival = 0;
    std::vector<std::vector<std::uint8_t>> pieces;
    std::vector<bool> have;
  };

  Micros timeout_;
  std::uint32_t watermark_;
  std::map<std::uint32_t, Partial> partial_;
  std::set<std::uint32_t> timed_out_;
};

/// Smoothed RTT: srtt <- (7 srtt + sample) / 8, integer, rounded half up.
class RttEstimator {
 public:
  void update(Micros sample);
  std::optional<Micros> srtt() const { return srtt_; }
  std::uint64_t samples() const { return samples_; }

 private:
  std::optional<Micros> srtt_;
  std::uint64_t samples_ = 0;
};

}  // namespace epicsim
