#include "vtlab/protocol.hpp"

#include <cstring>
#include <limits>
#include <stdexcept>

#include "vtlab/wire.hpp"

namespace vtlab::proto {

namespace {
constexpr char kMagic[4] = {'V', 'T', 'B', 'L'};
constexpr std::size_t kFixedHeader = 4 + 1 + 1 + 2 + 8 + 4;
}  // namespace

const char* decode_status_name(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::ok:
      return "ok";
    case DecodeStatus::truncated:
      return "truncated frame";
    case DecodeStatus::bad_magic:
      return "bad magic";
    case DecodeStatus::bad_version:
      return "unknown version";
    case DecodeStatus::bad_kind:
      return "unknown kind";
    case DecodeStatus::length_mismatch:
      return "length mismatch";
  }
  return "?";
}

std::vector<std::uint8_t> encode_body(const Message& msg) {
  if (msg.payload.size() > std::numeric_limits<std::uint32_t>::max())
    throw std::length_error("encode: payload too large for u32 count");
  std::vector<std::uint8_t> buf;
  buf.reserve(kFixedHeader + msg.payload.size() * 8 + 4);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  wire::put_u8(buf, kProtocolVersion);
  wire::put_u8(buf, static_cast<std::uint8_t>(msg.kind));
  wire::put_u16(buf, msg.party);
  wire::put_u64(buf, msg.sample_id);
  wire::put_u32(buf, static_cast<std::uint32_t>(msg.payload.size()));
  for (double v : msg.payload) wire::put_f64(buf, v);
  if (msg.kind == MsgKind::prediction) wire::put_u32(buf, msg.class_index);
  return buf;
}

std::vector<std::uint8_t> encode_frame(const Message& msg) {
  const std::vector<std::uint8_t> body = encode_body(msg);
  std::vector<std::uint8_t> framed;
  framed.reserve(body.size() + 4);
  wire::put_u32(framed, static_cast<std::uint32_t>(body.size()));
  framed.insert(framed.end(), body.begin(), body.end());
  return framed;
}

DecodeStatus decode_body(std::span<const std::uint8_t> body, Message& out) {
  if (body.size() < kFixedHeader) return DecodeStatus::truncated;
  const std::uint8_t* p = body.data();
  if (std::memcmp(p, kMagic, 4) != 0) return DecodeStatus::bad_magic;
  if (p[4] != kProtocolVersion) return DecodeStatus::bad_version;
  const std::uint8_t kind = p[5];
  if (kind < 1 || kind > 5) return DecodeStatus::bad_kind;
  out.kind = static_cast<MsgKind>(kind);
  out.party = wire::get_u16(p + 6);
  out.sample_id = wire::get_u64(p + 8);
  const std::uint32_t count = wire::get_u32(p + 16);
  std::size_t need = kFixedHeader + static_cast<std::size_t>(count) * 8;
  if (out.kind == MsgKind::prediction) need += 4;
  if (body.size() != need) return DecodeStatus::length_mismatch;
  out.payload.resize(count);
  const std::uint8_t* q = p + kFixedHeader;
  for (std::uint32_t i = 0; i < count; ++i, q += 8)
    out.payload[i] = wire::get_f64(q);
  out.class_index =
      out.kind == MsgKind::prediction ? wire::get_u32(q) : 0;
  return DecodeStatus::ok;
}

DecodeStatus decode_frame(std::span<const std::uint8_t> bytes, Message& out,
                          std::size_t& consumed) {
  consumed = 0;
  if (bytes.size() < 4) return DecodeStatus::truncated;
  const std::uint32_t len = wire::get_u32(bytes.data());
  if (bytes.size() < 4 + static_cast<std::size_t>(len))
    return DecodeStatus::truncated;
  const DecodeStatus st = decode_body(bytes.subspan(4, len), out);
  if (st == DecodeStatus::ok) consumed = 4 + static_cast<std::size_t>(len);
  return st;
}

}  // namespace vtlab::proto
