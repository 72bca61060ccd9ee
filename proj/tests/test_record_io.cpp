#include <gtest/gtest.h>

#include <sstream>

#include "dtree/record_io.hpp"
#include "dtree/wire.hpp"
#include "test_util.hpp"

namespace dtree {
namespace {

using testing::ip;

TraceRecord sample() {
  TraceRecord r;
  r.source = ip("1.2.3.4");
  r.destination = ip("5.6.7.8");
  r.timestamp = 12.5;
  r.backward_reason = StopReason::StopSet;
  r.backward_stop_distance = 2;
  r.forward_reason = StopReason::Gap;
  r.forward_stop_distance = 8;
  Hop a;
  a.ttl = 2;
  a.addresses = {ip("9.9.9.9")};
  a.rtts = {31.25};
  Hop b;
  b.ttl = 3;
  b.addresses = {std::nullopt};
  r.hops = {a, b};
  return r;
}

TEST(Records, FieldNamesAndStars) {
  const std::string line = record_to_json(sample());
  EXPECT_EQ(line,
            R"({"source":"1.2.3.4","destination":"5.6.7.8","timestamp":12.5,)"
            R"("backward_reason":"stop_set","backward_stop_distance":2,)"
            R"("forward_reason":"gap","forward_stop_distance":8,"hops":[)"
            R"({"ttl":2,"addresses":["9.9.9.9"],"rtts":[31.25]},)"
            R"({"ttl":3,"addresses":["*"],"rtts":[]}]})");
  EXPECT_EQ(record_from_json(line), sample());
}

TEST(Records, StreamRoundTrip) {
  std::stringstream buf;
  write_records(buf, {sample(), sample()});
  const auto back = read_records(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1], sample());
}

TEST(Records, BadLineNamesItsNumber) {
  std::istringstream in(record_to_json(sample()) + "\n{\"source\":1}\n");
  try {
    (void)read_records(in);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Summaries, RoundTrip) {
  MonitorSummary s;
  s.id = ip("1.1.1.1");
  s.final_state = AgentState::Failed;
  s.failure = "no update";
  s.h_per_window = {3, 4};
  s.estimation_probes = 20;
  s.trace_probes = 77;
  s.finish_s = 1300.5;
  s.waiting_s = 1200;
  s.waiting_periods = 40;
  s.transitions = {{0.0, AgentState::Probing, 0, 0},
                   {100.5, AgentState::Waiting, 0, 97},
                   {1300.5, AgentState::Failed, 40, 97}};
  std::stringstream buf;
  write_summaries(buf, {s});
  const auto back = read_summaries(buf);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].final_state, AgentState::Failed);
  EXPECT_EQ(back[0].h_per_window, s.h_per_window);
  EXPECT_EQ(back[0].transitions.size(), 3u);
  EXPECT_EQ(back[0].transitions[2].waiting_periods, 40);
}

TEST(MessageLog, RoundTrip) {
  SentMessage m{ip("1.1.1.1"), ip("2.2.2.2"), 25.998147, 3, 1,
                encode_message(0, std::vector<std::uint8_t>{3, 1, 0, 0})};
  std::stringstream buf;
  write_message_log(buf, {m});
  EXPECT_EQ(buf.str(), "1.1.1.1 2.2.2.2 25.998147 3 1 00 08 00 00 03 01 00 00\n");
  const auto back = read_message_log(buf);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].bytes, m.bytes);
  EXPECT_EQ(back[0].window, 3);
  std::istringstream bad("1.1.1.1 2.2.2.2\n");
  EXPECT_THROW((void)read_message_log(bad), std::runtime_error);
}

}  // namespace
}  // namespace dtree
