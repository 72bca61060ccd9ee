#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace dtree {

/// An IPv4 address in host byte order.
struct Address {
  std::uint32_t value = 0;

  constexpr Address() = default;
  constexpr explicit Address(std::uint32_t v) : value(v) {}
  constexpr Address(std::uint8_t a, std::uint8_t b, std::uint8_t c,
                    std::uint8_t d)
      : value((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) |
              (std::uint32_t{c} << 8) | std::uint32_t{d}) {}

  friend constexpr auto operator<=>(Address, Address) = default;

  /// Dotted-quad rendering.
  [[nodiscard]] std::string to_string() const;

  /// Parses a dotted-quad string; returns nullopt on malformed input.
  [[nodiscard]] static std::optional<Address> parse(std::string_view text);

  /// Same as parse() but throws std::invalid_argument.
  [[nodiscard]] static Address from_string(std::string_view text);

  /// Private and reserved ranges: 0/8, 10/8, 127/8, 172.16/12, 192.168/16.
  [[nodiscard]] bool is_invalid() const;

  /// The address with all bits past `prefix_len` cleared.
  [[nodiscard]] constexpr Address masked(int prefix_len) const {
    return Address{value & prefix_mask(prefix_len)};
  }

  [[nodiscard]] static constexpr std::uint32_t prefix_mask(int prefix_len) {
    if (prefix_len <= 0) return 0;
    if (prefix_len >= 32) return 0xFFFFFFFFu;
    return ~std::uint32_t{0} << (32 - prefix_len);
  }
};

}  // namespace dtree

template <>
struct std::hash<dtree::Address> {
  std::size_t operator()(dtree::Address a) const noexcept {
    return std::hash<std::uint32_t>{}(a.value);
  }
};
