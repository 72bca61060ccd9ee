#include <gtest/gtest.h>

#include <thread>

#include "dtree/errors.hpp"
#include "dtree/probe.hpp"
#include "test_util.hpp"

namespace dtree {
namespace {

using testing::node;

ProbeReply answer_from(Address a) {
  ProbeReply r;
  r.kind = ReplyKind::TimeExceeded;
  r.responder = a;
  r.rtt_ms = 10.0;
  return r;
}

TEST(MatchReply, TokenAndDestination) {
  const Address d = node(4);
  const std::vector<ProbeRequest> out = {{d, 3, ProbeToken{5}}};
  const auto m = match_reply(out, {answer_from(node(3)), d, ProbeToken{5}});
  ASSERT_TRUE(m);
  EXPECT_EQ(m->token, ProbeToken{5});
  EXPECT_EQ(m->ttl, 3);
}

TEST(MatchReply, WrongEchoedDestinationMatchesNothing) {
  const std::vector<ProbeRequest> out = {{node(4), 3, ProbeToken{5}}};
  EXPECT_FALSE(match_reply(out, {answer_from(node(3)), node(9), ProbeToken{5}}));
}

TEST(MatchReply, EmptyOutstandingSet) {
  EXPECT_FALSE(match_reply({}, {answer_from(node(3)), node(4), ProbeToken{5}}));
}

TEST(MatchReply, MangledPortFallsBackToDestination) {
  const std::vector<ProbeRequest> out = {{node(4), 3, ProbeToken{5}},
                                         {node(7), 2, ProbeToken{6}}};
  // Port rewritten to another live token: the destination still decides.
  const auto m = match_reply(out, {answer_from(node(3)), node(4), ProbeToken{6}});
  ASSERT_TRUE(m);
  EXPECT_EQ(m->token, ProbeToken{5});
}

TEST(MatchReply, AmbiguousDestinationWithoutTokenIsDropped) {
  const std::vector<ProbeRequest> out = {{node(4), 3, ProbeToken{5}},
                                         {node(4), 4, ProbeToken{6}}};
  EXPECT_FALSE(match_reply(out, {answer_from(node(3)), node(4), ProbeToken{99}}));
  EXPECT_EQ(match_reply(out, {answer_from(node(3)), node(4), ProbeToken{6}})->ttl, 4);
}

TEST(Dispatcher, InterleavedRepliesReachTheirOwnCallers) {
  ReplyDispatcher disp;
  auto f1 = disp.expect({node(10), 2, ProbeToken{1}});
  auto f2 = disp.expect({node(20), 2, ProbeToken{2}});
  EXPECT_EQ(disp.outstanding(), 2u);
  // Reverse arrival order.
  EXPECT_TRUE(disp.dispatch({answer_from(node(22)), node(20), ProbeToken{2}}));
  EXPECT_TRUE(disp.dispatch({answer_from(node(11)), node(10), ProbeToken{1}}));
  EXPECT_EQ(f1.get().responder, node(11));
  EXPECT_EQ(f2.get().responder, node(22));
  EXPECT_EQ(disp.outstanding(), 0u);
}

TEST(Dispatcher, DuplicateTokenIsContractViolation) {
  ReplyDispatcher disp;
  auto f = disp.expect({node(10), 2, ProbeToken{1}});
  EXPECT_THROW((void)disp.expect({node(20), 3, ProbeToken{1}}), ContractViolation);
}

TEST(Dispatcher, UnmatchedReplyIsDiscardedAndProbeExpires) {
  ReplyDispatcher disp;
  auto f = disp.expect({node(10), 2, ProbeToken{1}});
  EXPECT_FALSE(disp.dispatch({answer_from(node(3)), node(99), ProbeToken{1}}));
  EXPECT_EQ(disp.discarded(), 1u);
  disp.expire(ProbeToken{1});
  EXPECT_FALSE(f.get().responded());
}

TEST(SimulatedService, DelegatesToTopology) {
  const SimTopology t = testing::single_route({1, 2});
  SimulatedProbeService svc(t, node(0));
  const ProbeReply r = svc.probe(node(2), 1);
  EXPECT_EQ(r.kind, ReplyKind::TimeExceeded);
  EXPECT_EQ(r.responder, node(1));
  EXPECT_EQ(svc.probes_sent(), 1u);
  EXPECT_DOUBLE_EQ(svc.elapsed_ms(), *r.rtt_ms);
}

TEST(SimulatedService, TimeoutsChargeTheBudget) {
  const SimTopology t = testing::single_route({1, 2}, {1});
  SimProbeOptions opts;
  opts.timeout_ms = 1500;
  SimulatedProbeService svc(t, node(0), opts);
  EXPECT_FALSE(svc.probe(node(2), 1).responded());
  EXPECT_DOUBLE_EQ(svc.elapsed_ms(), 1500.0);
}

TEST(SimulatedService, CorruptedPortsStillMatchedByDestination) {
  const SimTopology t = testing::single_route({1, 2, 3, 4});
  SimProbeOptions opts;
  opts.corrupt_ports = true;
  SimulatedProbeService svc(t, node(0), opts);
  for (int ttl = 1; ttl <= 4; ++ttl) {
    EXPECT_EQ(svc.probe(node(4), ttl), t.probe(node(0), node(4), ttl));
  }
  EXPECT_EQ(svc.dispatcher().matched_by_destination(), 4u);
  EXPECT_EQ(svc.dispatcher().discarded(), 0u);
}

TEST(SimulatedService, ConcurrentCallersGetTheirOwnReplies) {
  // Several destinations probed from many threads at once; every reply must
  // be the one the topology gives for that caller's (dest, ttl).
  const SimTopology t = generate_topology(1, 16, {}, 21);
  SimProbeOptions opts;
  opts.max_outstanding = 4;
  opts.corrupt_ports = true;
  SimulatedProbeService svc(t, t.monitors()[0], opts);
  std::atomic<int> mismatches{0};
  std::vector<std::jthread> workers;
  for (Address d : t.destinations()) {
    workers.emplace_back([&, d] {
      for (int ttl = 1; ttl <= 10; ++ttl) {
        if (svc.probe(d, ttl) != t.probe(t.monitors()[0], d, ttl)) ++mismatches;
      }
    });
  }
  workers.clear();
  EXPECT_EQ(mismatches.load(), 0);
  EXPECT_EQ(svc.probes_sent(), 160u);
}

TEST(SimulatedService, RejectsBadRequests) {
  const SimTopology t = testing::single_route({1, 2});
  SimulatedProbeService svc(t, node(0));
  EXPECT_THROW((void)svc.probe(node(2), 0), ContractViolation);
  EXPECT_THROW((void)svc.probe(node(9), 1), ContractViolation);
}

}  // namespace
}  // namespace dtree
