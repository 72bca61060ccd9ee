#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <unordered_set>
#include <vector>

#include "dtree/address.hpp"

namespace dtree {

/// An (interface, destination) entry of the global stop set. With prefix
/// aggregation on, `dest_key` is the destination masked to the prefix.
struct PairKey {
  Address iface;
  Address dest_key;
  friend constexpr auto operator<=>(PairKey, PairKey) = default;
};

[[nodiscard]] PairKey make_key(Address iface, Address dest, int prefix_len);

/// The 8-byte canonical form: interface then destination key, big-endian.
[[nodiscard]] std::array<std::uint8_t, 8> key_bytes(PairKey key);

}  // namespace dtree

template <>
struct std::hash<dtree::PairKey> {
  std::size_t operator()(dtree::PairKey k) const noexcept {
    return std::hash<std::uint64_t>{}(
        (std::uint64_t{k.iface.value} << 32) | k.dest_key.value);
  }
};

namespace dtree {

/// Interfaces this monitor has already seen while probing backwards.
class LocalStopSet {
 public:
  /// Returns true if `a` was not present before.
  bool insert(Address a);
  [[nodiscard]] bool contains(Address a) const;
  [[nodiscard]] std::size_t size() const;

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_set<Address> interfaces_;
};

/// k bit positions for `key` in a filter of `m` bits. The SHA-1 digest of
/// the key's 8-byte form is split into five big-endian 32-bit words and
/// position i is word i mod m, so k is at most 5.
[[nodiscard]] std::vector<std::uint32_t> bloom_positions(PairKey key,
                                                         std::uint32_t m,
                                                         int k);

class BloomFilter {
 public:
  static constexpr int kMaxHashes = 5;

  /// Throws std::invalid_argument unless m >= 1 and 1 <= k <= 5.
  BloomFilter(std::uint32_t m, int k);

  void insert(PairKey key);
  [[nodiscard]] bool contains(PairKey key) const;
  /// Bitwise OR of another filter with identical (m, k).
  void merge(const BloomFilter& other);

  [[nodiscard]] std::uint32_t bit_count() const { return m_; }
  [[nodiscard]] int hash_count() const { return k_; }
  /// Keys registered through insert() (not merge()).
  [[nodiscard]] std::uint64_t inserted() const { return inserted_; }
  [[nodiscard]] std::uint64_t popcount() const;
  [[nodiscard]] bool test_bit(std::uint32_t i) const;

  /// 4-byte m, 4-byte k (both big-endian), then ceil(m/8) bytes of bits,
  /// bit i at byte i/8 under mask 0x80 >> (i % 8).
  [[nodiscard]] std::vector<std::uint8_t> to_bytes() const;
  /// Throws WireError on a malformed descriptor or length.
  [[nodiscard]] static BloomFilter from_bytes(std::span<const std::uint8_t> b);

  /// Same shape and bits; the insert counter is bookkeeping only.
  friend bool operator==(const BloomFilter& a, const BloomFilter& b) {
    return a.m_ == b.m_ && a.k_ == b.k_ && a.words_ == b.words_;
  }

 private:
  void set_bit(std::uint32_t i);

  std::uint32_t m_;
  int k_;
  std::vector<std::uint64_t> words_;
  std::uint64_t inserted_ = 0;
};

enum class StopSetImpl { List, Bloom };

struct BloomParams {
  std::uint32_t bits = 10'000'000;
  int hashes = 5;
};

/// Shared (interface, destination) knowledge stopping forwards probing.
/// The list variant is exact; the Bloom variant has no false negatives.
class GlobalStopSet {
 public:
  explicit GlobalStopSet(StopSetImpl impl = StopSetImpl::List,
                         int prefix_len = 32, BloomParams bloom = {});

  [[nodiscard]] PairKey key_for(Address iface, Address dest) const {
    return make_key(iface, dest, prefix_len_);
  }

  /// Returns true when the key was not already reported as present.
  bool insert(PairKey key);
  [[nodiscard]] bool contains(PairKey key) const;
  /// Inserts every pair; idempotent.
  void merge_update(std::span<const PairKey> pairs);
  /// ORs in a received filter. Only valid for the Bloom variant.
  void merge_filter(const BloomFilter& filter);

  [[nodiscard]] StopSetImpl impl() const { return impl_; }
  [[nodiscard]] int prefix_len() const { return prefix_len_; }
  [[nodiscard]] BloomParams bloom_params() const { return bloom_params_; }
  /// Exact entries held by the list variant; 0 for Bloom.
  [[nodiscard]] std::size_t list_size() const;
  /// Snapshot of the Bloom variant's filter. Throws for the list variant.
  [[nodiscard]] BloomFilter filter() const;

 private:
  StopSetImpl impl_;
  int prefix_len_;
  BloomParams bloom_params_;
  mutable std::shared_mutex mutex_;
  std::unordered_set<PairKey> pairs_;
  std::vector<BloomFilter> bloom_;  // one element in Bloom mode
};

/// Concatenated 8-byte key groups.
[[nodiscard]] std::vector<std::uint8_t> serialize_update(
    std::span<const PairKey> pairs);
/// Throws WireError when the length is not a multiple of 8.
[[nodiscard]] std::vector<PairKey> parse_update(
    std::span<const std::uint8_t> bytes);

}  // namespace dtree
