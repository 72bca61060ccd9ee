#include <gtest/gtest.h>

#include "dtree/address.hpp"

namespace dtree {
namespace {

TEST(Address, DottedQuadRoundTrip) {
  const Address a = Address::from_string("192.168.1.77");
  EXPECT_EQ(a.value, 0xC0A8014Du);
  EXPECT_EQ(a.to_string(), "192.168.1.77");
  EXPECT_EQ(Address(0).to_string(), "0.0.0.0");
  EXPECT_EQ(Address(0xFFFFFFFFu).to_string(), "255.255.255.255");
}

TEST(Address, RejectsMalformedText) {
  for (const char* bad : {"", "1.2.3", "1.2.3.4.5", "256.0.0.1", "a.b.c.d",
                          "1..2.3", " 1.2.3.4", "1.2.3.4 ", "-1.2.3.4"}) {
    EXPECT_FALSE(Address::parse(bad)) << bad;
  }
  EXPECT_THROW((void)Address::from_string("1.2.3"), std::invalid_argument);
}

TEST(Address, InvalidRanges) {
  for (const char* priv : {"10.37.200.9", "172.16.0.1", "172.31.255.255",
                           "192.168.0.5", "127.0.0.1", "0.1.2.3"}) {
    EXPECT_TRUE(Address::from_string(priv).is_invalid()) << priv;
  }
  for (const char* pub : {"172.15.255.255", "172.32.0.0", "192.169.0.1",
                          "11.0.0.1", "8.8.8.8"}) {
    EXPECT_FALSE(Address::from_string(pub).is_invalid()) << pub;
  }
}

TEST(Address, Masking) {
  const Address d = Address::from_string("192.168.1.77");
  EXPECT_EQ(d.masked(24).to_string(), "192.168.1.0");
  EXPECT_EQ(d.masked(32), d);
  EXPECT_EQ(d.masked(0).value, 0u);
  EXPECT_EQ(Address::from_string("10.37.200.9").masked(8).to_string(), "10.0.0.0");
}

}  // namespace
}  // namespace dtree
