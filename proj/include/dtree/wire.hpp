#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dtree/stopset.hpp"

namespace dtree {

// Message framing between monitors.
//
//    0                   1                   2                   3
//    0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//   +-------------------------------+-------------------------------+
//   |            length             |             type              |
//   +-------------------------------+-------------------------------+
//   |                         payload ...                           |
//
// `length` counts the header too, so the smallest message is 4 bytes. Both
// fields are big-endian. A StopSet (type 0) payload is
//
//   +---------------+---------------+-+-+-+-------------------------+
//   |    window     |     slice     |s|i|c|        reserved         |
//   +---------------+---------------+-+-+-+-------------------------+
//   |                         stop set ...                          |
//
// s: 0 list, 1 Bloom. i: 0 IPv4, 1 IPv6 (unsupported). c: 1 if the stop set
// bytes are a raw DEFLATE stream. Reserved bits are written as zero and
// ignored on input.

inline constexpr std::size_t kHeaderSize = 4;
inline constexpr std::size_t kMaxMessageSize = 65535;
inline constexpr std::size_t kStopSetPrefixSize = 4;
/// Largest stop set byte count one StopSet frame can carry.
inline constexpr std::size_t kMaxStopSetBytes =
    kMaxMessageSize - kHeaderSize - kStopSetPrefixSize;

enum class MessageType : std::uint16_t { StopSet = 0 };

struct Message {
  std::uint16_t type = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Message&, const Message&) = default;
};

/// Throws std::length_error when the frame would exceed 65535 bytes.
[[nodiscard]] std::vector<std::uint8_t> encode_message(
    std::uint16_t type, std::span<const std::uint8_t> payload);
/// `bytes` must hold exactly one message. Throws WireError.
[[nodiscard]] Message decode_message(std::span<const std::uint8_t> bytes);
/// Splits a concatenation of messages by their length fields. Throws
/// WireError naming the offset of a truncated or undersized frame.
[[nodiscard]] std::vector<std::span<const std::uint8_t>> split_messages(
    std::span<const std::uint8_t> stream);

struct StopSetPayload {
  std::uint8_t window = 0;
  std::uint8_t slice = 0;
  StopSetImpl kind = StopSetImpl::List;
  bool ipv6 = false;
  bool compressed = false;
  std::vector<std::uint8_t> stopset;
  friend bool operator==(const StopSetPayload&, const StopSetPayload&) =
      default;
};

/// Full message (header included).
[[nodiscard]] std::vector<std::uint8_t> encode_stopset(
    const StopSetPayload& payload);
/// Parses a full StopSet message. Throws WireError on a wrong type, an IPv6
/// flag, or an uncompressed list whose length is not a multiple of 8.
[[nodiscard]] StopSetPayload decode_stopset(std::span<const std::uint8_t> bytes);

/// Raw DEFLATE (RFC 1951).
[[nodiscard]] std::vector<std::uint8_t> compress_update(
    std::span<const std::uint8_t> bytes);
/// Throws WireError on a corrupt or truncated stream.
[[nodiscard]] std::vector<std::uint8_t> decompress_update(
    std::span<const std::uint8_t> bytes);

/// Splits one logical update into as many StopSet messages as the 16-bit
/// length allows. `header` supplies window, slice and flags; its stopset
/// field is ignored. Uncompressed lists are cut on 8-byte boundaries so each
/// frame decodes on its own. Always yields at least one message.
[[nodiscard]] std::vector<std::vector<std::uint8_t>> frame_update(
    const StopSetPayload& header, std::span<const std::uint8_t> stream);

/// Space-separated uppercase hex, e.g. "00 04 00 00".
[[nodiscard]] std::string to_hex(std::span<const std::uint8_t> bytes);
/// Inverse of to_hex; whitespace is ignored. Throws std::invalid_argument.
[[nodiscard]] std::vector<std::uint8_t> from_hex(const std::string& text);

}  // namespace dtree
