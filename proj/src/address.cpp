#include "dtree/address.hpp"

#include <charconv>
#include <stdexcept>

namespace dtree {

std::string Address::to_string() const {
  std::string out;
  out.reserve(15);
  for (int shift = 24; shift >= 0; shift -= 8) {
    out += std::to_string((value >> shift) & 0xFF);
    if (shift != 0) out += '.';
  }
  return out;
}

std::optional<Address> Address::parse(std::string_view text) {
  std::uint32_t result = 0;
  const char* cur = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (cur == end || *cur != '.') return std::nullopt;
      ++cur;
    }
    // Reject signs and empty fields, which from_chars would otherwise accept
    // or report as errors inconsistently.
    if (cur == end || *cur < '0' || *cur > '9') return std::nullopt;
    unsigned v = 0;
    auto [next, ec] = std::from_chars(cur, end, v);
    if (ec != std::errc{} || v > 255 || next - cur > 3) return std::nullopt;
    result = (result << 8) | v;
    cur = next;
  }
  if (cur != end) return std::nullopt;
  return Address{result};
}

Address Address::from_string(std::string_view text) {
  auto parsed = parse(text);
  if (!parsed) {
    throw std::invalid_argument("malformed IPv4 address '" +
                                std::string(text) + "'");
  }
  return *parsed;
}

bool Address::is_invalid() const {
  const std::uint32_t a = value >> 24;
  if (a == 0 || a == 10 || a == 127) return true;
  if ((value & prefix_mask(12)) == Address(172, 16, 0, 0).value) return true;
  if ((value & prefix_mask(16)) == Address(192, 168, 0, 0).value) return true;
  return false;
}

}  // namespace dtree
