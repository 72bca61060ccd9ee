#include "dtree/wire.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "dtree/errors.hpp"

namespace dtree {

namespace {

constexpr std::uint16_t kFlagBloom = 0x8000;
constexpr std::uint16_t kFlagIpv6 = 0x4000;
constexpr std::uint16_t kFlagCompressed = 0x2000;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

}  // namespace

std::vector<std::uint8_t> encode_message(
    std::uint16_t type, std::span<const std::uint8_t> payload) {
  const std::size_t total = kHeaderSize + payload.size();
  if (total > kMaxMessageSize) {
    throw std::length_error("message of " + std::to_string(total) +
                            " bytes exceeds the 16-bit length field; split "
                            "the update");
  }
  std::vector<std::uint8_t> out;
  out.reserve(total);
  put_u16(out, static_cast<std::uint16_t>(total));
  put_u16(out, type);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Message decode_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    throw WireError("truncated header: " + std::to_string(bytes.size()) +
                        " of 4 bytes",
                    bytes.size());
  }
  const std::size_t length = get_u16(bytes, 0);
  if (length < kHeaderSize) {
    throw WireError("length field " + std::to_string(length) +
                        " is below the 4-byte minimum",
                    0);
  }
  if (bytes.size() < length) {
    throw WireError("truncated message: length field says " +
                        std::to_string(length) + " bytes, got " +
                        std::to_string(bytes.size()),
                    bytes.size());
  }
  if (bytes.size() > length) {
    throw WireError("trailing bytes after a " + std::to_string(length) +
                        "-byte message",
                    length);
  }
  Message m;
  m.type = get_u16(bytes, 2);
  m.payload.assign(bytes.begin() + kHeaderSize, bytes.end());
  return m;
}

std::vector<std::span<const std::uint8_t>> split_messages(
    std::span<const std::uint8_t> stream) {
  std::vector<std::span<const std::uint8_t>> out;
  std::size_t at = 0;
  while (at < stream.size()) {
    const std::size_t left = stream.size() - at;
    if (left < kHeaderSize) {
      throw WireError("truncated header: " + std::to_string(left) +
                          " of 4 bytes",
                      at);
    }
    const std::size_t length = get_u16(stream, at);
    if (length < kHeaderSize) {
      throw WireError("length field " + std::to_string(length) +
                          " is below the 4-byte minimum",
                      at);
    }
    if (left < length) {
      throw WireError("truncated message: length field says " +
                          std::to_string(length) + " bytes, " +
                          std::to_string(left) + " remain",
                      at);
    }
    out.push_back(stream.subspan(at, length));
    at += length;
  }
  return out;
}

std::vector<std::uint8_t> encode_stopset(const StopSetPayload& payload) {
  if (payload.ipv6) {
    throw std::invalid_argument("IPv6 stop sets are not supported");
  }
  if (payload.kind == StopSetImpl::List && !payload.compressed &&
      payload.stopset.size() % 8 != 0) {
    throw std::invalid_argument(
        "uncompressed list stop set must be whole 8-byte pairs");
  }
  std::vector<std::uint8_t> body;
  body.reserve(kStopSetPrefixSize + payload.stopset.size());
  body.push_back(payload.window);
  body.push_back(payload.slice);
  std::uint16_t flags = 0;
  if (payload.kind == StopSetImpl::Bloom) flags |= kFlagBloom;
  if (payload.compressed) flags |= kFlagCompressed;
  put_u16(body, flags);
  body.insert(body.end(), payload.stopset.begin(), payload.stopset.end());
  return encode_message(static_cast<std::uint16_t>(MessageType::StopSet), body);
}

StopSetPayload decode_stopset(std::span<const std::uint8_t> bytes) {
  Message m = decode_message(bytes);
  if (m.type != static_cast<std::uint16_t>(MessageType::StopSet)) {
    throw WireError("unknown message type " + std::to_string(m.type), 2);
  }
  if (m.payload.size() < kStopSetPrefixSize) {
    throw WireError("StopSet payload shorter than its 4-byte prefix",
                    bytes.size());
  }
  const std::uint16_t flags = get_u16(m.payload, 2);
  StopSetPayload p;
  p.window = m.payload[0];
  p.slice = m.payload[1];
  p.kind = (flags & kFlagBloom) ? StopSetImpl::Bloom : StopSetImpl::List;
  p.ipv6 = (flags & kFlagIpv6) != 0;
  p.compressed = (flags & kFlagCompressed) != 0;
  if (p.ipv6) {
    throw WireError("IPv6 stop sets are not supported", kHeaderSize + 2);
  }
  p.stopset.assign(m.payload.begin() + kStopSetPrefixSize, m.payload.end());
  if (p.kind == StopSetImpl::List && !p.compressed &&
      p.stopset.size() % 8 != 0) {
    throw WireError("list stop set of " + std::to_string(p.stopset.size()) +
                        " bytes is not whole 8-byte pairs",
                    bytes.size() - p.stopset.size() % 8);
  }
  return p;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> compress_update(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_BEST_COMPRESSION, Z_DEFLATED, -15, 9,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw std::runtime_error("deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, bytes.size()) + 16);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate did not finish");
  out.resize(produced);
  return out;
}

std::vector<std::uint8_t> decompress_update(
    std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) {
    throw std::runtime_error("inflateInit2 failed");
  }
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[16384];
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk;
    zs.avail_out = sizeof chunk;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      const std::size_t at = zs.total_in;
      inflateEnd(&zs);
      throw WireError(rc == Z_BUF_ERROR ? "truncated DEFLATE stream"
                                        : "corrupt DEFLATE stream",
                      at);
    }
    out.insert(out.end(), chunk, chunk + (sizeof chunk - zs.avail_out));
  }
  const std::size_t consumed = zs.total_in;
  inflateEnd(&zs);
  if (consumed != bytes.size()) {
    throw WireError("trailing bytes after DEFLATE stream", consumed);
  }
  return out;
}

std::vector<std::vector<std::uint8_t>> frame_update(
    const StopSetPayload& header, std::span<const std::uint8_t> stream) {
  std::size_t chunk = kMaxStopSetBytes;
  if (header.kind == StopSetImpl::List && !header.compressed) chunk -= chunk % 8;
  std::vector<std::vector<std::uint8_t>> frames;
  std::size_t at = 0;
  do {
    const std::size_t n = std::min(chunk, stream.size() - at);
    StopSetPayload p = header;
    p.stopset.assign(stream.begin() + static_cast<std::ptrdiff_t>(at),
                     stream.begin() + static_cast<std::ptrdiff_t>(at + n));
    frames.push_back(encode_stopset(p));
    at += n;
  } while (at < stream.size());
  return frames;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(bytes.size() * 3);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (i) out += ' ';
    out += kDigits[bytes[i] >> 4];
    out += kDigits[bytes[i] & 0xF];
  }
  return out;
}

std::vector<std::uint8_t> from_hex(const std::string& text) {
  std::vector<std::uint8_t> out;
  int pending = -1;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    int v;
    if (ch >= '0' && ch <= '9') {
      v = ch - '0';
    } else if (ch >= 'a' && ch <= 'f') {
      v = ch - 'a' + 10;
    } else if (ch >= 'A' && ch <= 'F') {
      v = ch - 'A' + 10;
    } else {
      throw std::invalid_argument(std::string("non-hex character '") + ch + "'");
    }
    if (pending < 0) {
      pending = v;
    } else {
      out.push_back(static_cast<std::uint8_t>(pending << 4 | v));
      pending = -1;
    }
  }
  if (pending >= 0) throw std::invalid_argument("odd number of hex digits");
  return out;
}

}  // namespace dtree
