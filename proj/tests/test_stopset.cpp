#include <gtest/gtest.h>

#include <random>

#include "dtree/errors.hpp"
#include "dtree/stopset.hpp"
#include "dtree/wire.hpp"
#include "test_util.hpp"

namespace dtree {
namespace {

using testing::ip;

const PairKey kFixtureKey{ip("10.0.0.1"), ip("192.168.0.5")};

TEST(LocalStopSet, SetSemantics) {
  LocalStopSet s;
  EXPECT_FALSE(s.contains(ip("1.2.3.4")));
  EXPECT_TRUE(s.insert(ip("1.2.3.4")));
  EXPECT_FALSE(s.insert(ip("1.2.3.4")));
  EXPECT_TRUE(s.contains(ip("1.2.3.4")));
  EXPECT_EQ(s.size(), 1u);
}

TEST(MakeKey, PrefixMasking) {
  const Address i = ip("5.6.7.8");
  EXPECT_EQ(make_key(i, ip("192.168.1.77"), 24).dest_key, ip("192.168.1.0"));
  EXPECT_EQ(make_key(i, ip("192.168.1.77"), 32).dest_key, ip("192.168.1.77"));
  EXPECT_EQ(make_key(i, ip("10.37.200.9"), 8).dest_key, ip("10.0.0.0"));
  EXPECT_EQ(make_key(i, ip("10.37.200.9"), 8).iface, i);
}

TEST(KeyBytes, BigEndianInterfaceThenDestination) {
  const auto b = key_bytes(kFixtureKey);
  const std::array<std::uint8_t, 8> want = {0x0A, 0x00, 0x00, 0x01,
                                            0xC0, 0xA8, 0x00, 0x05};
  EXPECT_EQ(b, want);
}

TEST(BloomPositions, KnownAnswer) {
  // SHA-1(0A000001C0A80005) = 0371ea4d b9f1c189 0a0a1a2c b8835d1d d3b7e532
  EXPECT_EQ(bloom_positions(kFixtureKey, 10'000'000, 5),
            (std::vector<std::uint32_t>{7797197, 9628681, 8434220, 5616797,
                                        2044338}));
  EXPECT_EQ(bloom_positions(kFixtureKey, 100'000, 3),
            (std::vector<std::uint32_t>{97197, 28681, 34220}));
}

TEST(BloomPositions, DeterministicLengthAndRange) {
  std::mt19937 gen(3);
  for (int i = 0; i < 200; ++i) {
    const PairKey k{Address(gen()), Address(gen())};
    const std::uint32_t m = 1 + gen() % 5000;
    const int hashes = 1 + static_cast<int>(gen() % 5);
    const auto p = bloom_positions(k, m, hashes);
    EXPECT_EQ(p, bloom_positions(k, m, hashes));
    ASSERT_EQ(p.size(), static_cast<std::size_t>(hashes));
    for (auto x : p) EXPECT_LT(x, m);
  }
}

TEST(BloomPositions, DistinctKeysDifferOnLargeFilters) {
  std::mt19937 gen(17);
  std::set<std::vector<std::uint32_t>> seen;
  for (int i = 0; i < 2000; ++i) {
    const PairKey k{Address(0x01000000u + static_cast<std::uint32_t>(i)),
                    Address(gen())};
    seen.insert(bloom_positions(k, 10'000'000, 5));
  }
  EXPECT_EQ(seen.size(), 2000u);
}

TEST(BloomFilter, RejectsBadShape) {
  EXPECT_THROW(BloomFilter(0, 1), std::invalid_argument);
  EXPECT_THROW(BloomFilter(10, 0), std::invalid_argument);
  EXPECT_THROW(BloomFilter(10, 6), std::invalid_argument);
}

TEST(BloomFilter, NoFalseNegativesOnSmallCorpus) {
  BloomFilter f(100'000, 5);
  std::mt19937 gen(1);
  std::vector<PairKey> keys;
  for (int i = 0; i < 100; ++i) keys.push_back({Address(gen()), Address(gen())});
  for (auto k : keys) f.insert(k);
  for (auto k : keys) EXPECT_TRUE(f.contains(k));
  EXPECT_EQ(f.inserted(), 100u);
  EXPECT_LE(f.popcount(), 500u);
}

TEST(BloomFilter, ByteLayoutKnownAnswer) {
  BloomFilter f(20, 2);  // positions 17 and 1
  f.insert(kFixtureKey);
  EXPECT_TRUE(f.test_bit(1));
  EXPECT_TRUE(f.test_bit(17));
  EXPECT_EQ(to_hex(f.to_bytes()), "00 00 00 14 00 00 00 02 40 00 40");
}

TEST(BloomFilter, BytesRoundTripAndValidation) {
  BloomFilter f(1000, 4);
  std::mt19937 gen(9);
  for (int i = 0; i < 50; ++i) f.insert({Address(gen()), Address(gen())});
  const auto bytes = f.to_bytes();
  EXPECT_EQ(bytes.size(), 8u + 125u);
  BloomFilter back = BloomFilter::from_bytes(bytes);
  EXPECT_EQ(back.popcount(), f.popcount());
  for (std::uint32_t i = 0; i < 1000; ++i) EXPECT_EQ(back.test_bit(i), f.test_bit(i));

  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW((void)BloomFilter::from_bytes(truncated), WireError);
  EXPECT_THROW((void)BloomFilter::from_bytes(std::vector<std::uint8_t>(5)), WireError);
  auto bad_k = bytes;
  bad_k[7] = 9;
  EXPECT_THROW((void)BloomFilter::from_bytes(bad_k), WireError);
}

TEST(BloomFilter, MergeIsUnion) {
  BloomFilter a(500, 3), b(500, 3);
  a.insert({ip("1.1.1.1"), ip("2.2.2.2")});
  b.insert({ip("3.3.3.3"), ip("4.4.4.4")});
  a.merge(b);
  EXPECT_TRUE(a.contains({ip("1.1.1.1"), ip("2.2.2.2")}));
  EXPECT_TRUE(a.contains({ip("3.3.3.3"), ip("4.4.4.4")}));
  EXPECT_THROW(a.merge(BloomFilter(501, 3)), std::invalid_argument);
}

TEST(GlobalStopSet, ListMembershipIsExact) {
  GlobalStopSet g;
  const PairKey k = g.key_for(ip("9.9.9.9"), ip("8.8.8.8"));
  EXPECT_TRUE(g.insert(k));
  EXPECT_FALSE(g.insert(k));
  EXPECT_TRUE(g.contains(k));
  EXPECT_FALSE(g.contains(g.key_for(ip("9.9.9.9"), ip("8.8.8.9"))));
  EXPECT_EQ(g.list_size(), 1u);
  EXPECT_THROW((void)g.filter(), std::logic_error);
}

TEST(GlobalStopSet, PrefixKeysAggregateDestinations) {
  GlobalStopSet g(StopSetImpl::List, 24);
  g.insert(g.key_for(ip("9.9.9.9"), ip("192.168.1.77")));
  EXPECT_TRUE(g.contains(g.key_for(ip("9.9.9.9"), ip("192.168.1.200"))));
  EXPECT_FALSE(g.contains(g.key_for(ip("9.9.9.9"), ip("192.168.2.1"))));
}

TEST(GlobalStopSet, MergeUpdateIsIdempotent) {
  const std::vector<PairKey> pairs = {{ip("1.0.0.1"), ip("2.0.0.1")},
                                      {ip("1.0.0.2"), ip("2.0.0.1")}};
  GlobalStopSet once, twice;
  once.merge_update(pairs);
  twice.merge_update(pairs);
  twice.merge_update(pairs);
  EXPECT_EQ(once.list_size(), twice.list_size());
  for (auto k : pairs) EXPECT_TRUE(twice.contains(k));

  GlobalStopSet bloom(StopSetImpl::Bloom, 32, {100'000, 5});
  bloom.merge_update(pairs);
  for (auto k : pairs) EXPECT_TRUE(bloom.contains(k));
}

TEST(GlobalStopSet, MergeFilter) {
  GlobalStopSet g(StopSetImpl::Bloom, 32, {4096, 5});
  BloomFilter delta(4096, 5);
  delta.insert(kFixtureKey);
  g.merge_filter(delta);
  EXPECT_TRUE(g.contains(kFixtureKey));
  EXPECT_THROW(g.merge_filter(BloomFilter(4095, 5)), std::invalid_argument);
  GlobalStopSet list;
  EXPECT_THROW(list.merge_filter(delta), std::logic_error);
}

TEST(UpdateSerialization, FixturePair) {
  const std::vector<PairKey> one = {kFixtureKey};
  EXPECT_EQ(to_hex(serialize_update(one)), "0A 00 00 01 C0 A8 00 05");
  EXPECT_TRUE(serialize_update({}).empty());
  EXPECT_EQ(parse_update(serialize_update(one)), one);
}

TEST(UpdateSerialization, RejectsPartialGroups) {
  EXPECT_THROW((void)parse_update(std::vector<std::uint8_t>(7)), WireError);
  EXPECT_THROW((void)parse_update(std::vector<std::uint8_t>(9)), WireError);
  EXPECT_TRUE(parse_update({}).empty());
}

}  // namespace
}  // namespace dtree
