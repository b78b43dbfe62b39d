#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "privswarm/fixed_point.hpp"

namespace privswarm {

// Accounting phases. The order is part of the wire format (phase tag byte).
enum class Phase : std::uint8_t {
  setup = 0,
  share_input = 1,
  linear = 2,
  mul = 3,
  trunc = 4,
  compare = 5,
  softmax = 6,
  gelu = 7,
  output = 8,
};
inline constexpr std::size_t kPhaseCount = 9;
std::string_view phase_name(Phase p) noexcept;

// Protocol opcode byte of the frame header.
enum class Opcode : std::uint8_t {
  seed_exchange = 1,
  input = 2,
  mul = 3,
  trunc = 4,
  and_gate = 5,
  reveal = 6,
  beaver_open = 7,
};

// Frame layout, little-endian:
//   u32 payload bytes | u8 phase | u8 sender | u8 receiver | u8 opcode |
//   u64 sequence | payload (u64 ring values)
inline constexpr std::size_t kFrameHeaderBytes = 16;
// Frames above this payload size are rejected.
inline constexpr std::size_t kMaxFramePayloadBytes = std::size_t{1} << 30;

struct FrameHeader {
  std::uint32_t payload_bytes = 0;
  Phase phase = Phase::setup;
  std::uint8_t sender = 0;    // 1-based party number
  std::uint8_t receiver = 0;  // 1-based party number
  Opcode opcode = Opcode::mul;
  std::uint64_t sequence = 0;

  friend bool operator==(const FrameHeader&, const FrameHeader&) = default;
};

using Bytes = std::vector<std::uint8_t>;

Bytes encode_frame(const FrameHeader& header, std::span<const Ring> payload);
// Throws FrameError if the buffer is too short or the declared length is
// implausible.
FrameHeader decode_header(std::span<const std::uint8_t> bytes);
// Decodes the payload of a complete frame (header included).
std::vector<Ring> decode_payload(std::span<const std::uint8_t> frame);

void put_u64(std::uint8_t* out, std::uint64_t v) noexcept;
std::uint64_t get_u64(const std::uint8_t* in) noexcept;
void put_u32(std::uint8_t* out, std::uint32_t v) noexcept;
std::uint32_t get_u32(const std::uint8_t* in) noexcept;

}  // namespace privswarm
