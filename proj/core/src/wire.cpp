#include "privswarm/wire.hpp"

#include <string>

#include "privswarm/errors.hpp"

namespace privswarm {

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::setup: return "setup";
    case Phase::share_input: return "share_input";
    case Phase::linear: return "linear";
    case Phase::mul: return "mul";
    case Phase::trunc: return "trunc";
    case Phase::compare: return "compare";
    case Phase::softmax: return "softmax";
    case Phase::gelu: return "gelu";
    case Phase::output: return "output";
  }
  return "unknown";
}

void put_u64(std::uint8_t* out, std::uint64_t v) noexcept {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_u64(const std::uint8_t* in) noexcept {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{in[i]} << (8 * i);
  return v;
}

void put_u32(std::uint8_t* out, std::uint32_t v) noexcept {
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* in) noexcept {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[i]} << (8 * i);
  return v;
}

Bytes encode_frame(const FrameHeader& header, std::span<const Ring> payload) {
  const std::size_t payload_bytes = payload.size() * sizeof(Ring);
  if (payload_bytes > kMaxFramePayloadBytes) {
    throw FrameError("frame payload of " + std::to_string(payload_bytes) +
                     " bytes exceeds limit");
  }
  Bytes out(kFrameHeaderBytes + payload_bytes);
  put_u32(out.data(), static_cast<std::uint32_t>(payload_bytes));
  out[4] = static_cast<std::uint8_t>(header.phase);
  out[5] = header.sender;
  out[6] = header.receiver;
  out[7] = static_cast<std::uint8_t>(header.opcode);
  put_u64(out.data() + 8, header.sequence);
  std::uint8_t* p = out.data() + kFrameHeaderBytes;
  for (Ring v : payload) {
    put_u64(p, v);
    p += 8;
  }
  return out;
}

FrameHeader decode_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) {
    throw FrameError("truncated frame header");
  }
  FrameHeader h;
  h.payload_bytes = get_u32(bytes.data());
  h.phase = static_cast<Phase>(bytes[4]);
  h.sender = bytes[5];
  h.receiver = bytes[6];
  h.opcode = static_cast<Opcode>(bytes[7]);
  h.sequence = get_u64(bytes.data() + 8);
  if (h.payload_bytes > kMaxFramePayloadBytes) {
    throw FrameError("oversize frame: " + std::to_string(h.payload_bytes) +
                     " payload bytes");
  }
  if (h.payload_bytes % sizeof(Ring) != 0) {
    throw FrameError("payload length not a multiple of 8");
  }
  if (static_cast<std::size_t>(h.phase) >= kPhaseCount) {
    throw FrameError("unknown phase tag");
  }
  return h;
}

std::vector<Ring> decode_payload(std::span<const std::uint8_t> frame) {
  const FrameHeader h = decode_header(frame);
  if (frame.size() != kFrameHeaderBytes + h.payload_bytes) {
    throw FrameError("frame length " + std::to_string(frame.size()) +
                     " disagrees with header");
  }
  std::vector<Ring> out(h.payload_bytes / sizeof(Ring));
  const std::uint8_t* p = frame.data() + kFrameHeaderBytes;
  for (auto& v : out) {
    v = get_u64(p);
    p += 8;
  }
  return out;
}

}  // namespace privswarm
