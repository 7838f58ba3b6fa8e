#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vtlab::proto {

enum class MsgKind : std::uint8_t {
  embedding = 1,
  prediction = 2,
  reject = 3,
  grad = 4,
  control = 5,
};

// CONTROL messages use sample_id as an opcode.
enum ControlCode : std::uint64_t {
  kControlHello = 0,
  kControlEndSession = 1,
};

struct Message {
  MsgKind kind = MsgKind::control;
  std::uint16_t party = 0;
  std::uint64_t sample_id = 0;
  std::vector<double> payload;
  std::uint32_t class_index = 0;  // PREDICTION only

  bool operator==(const Message&) const = default;
};

constexpr std::uint8_t kProtocolVersion = 1;

// Body layout (after the u32 LE frame-length prefix):
//   "VTBL" | u8 version | u8 kind | u16 LE party | u64 LE sample id |
//   u32 LE payload element count | payload f64 LE ... |
//   (PREDICTION only) u32 LE class index
std::vector<std::uint8_t> encode_body(const Message& msg);

// encode_body plus the leading u32 LE frame length (excluding itself).
std::vector<std::uint8_t> encode_frame(const Message& msg);

enum class DecodeStatus {
  ok,
  truncated,
  bad_magic,
  bad_version,
  bad_kind,
  length_mismatch,
};

const char* decode_status_name(DecodeStatus s);

// Decodes one frame body (without the length prefix).
DecodeStatus decode_body(std::span<const std::uint8_t> body, Message& out);

// Consumes a full frame (length prefix + body) from the front of `bytes`;
// on success sets `consumed` to the total bytes used. Never reads past the
// declared frame.
DecodeStatus decode_frame(std::span<const std::uint8_t> bytes, Message& out,
                          std::size_t& consumed);

}  // namespace vtlab::proto
