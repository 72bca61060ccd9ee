#include "dtree/record_io.hpp"

#include <cstdio>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "dtree/wire.hpp"

namespace dtree {

using nlohmann::ordered_json;

namespace {

StopReason reason_from(const ordered_json& j) {
  const auto r = parse_stop_reason(j.get<std::string>());
  if (!r) throw std::runtime_error("unknown stop reason " + j.dump());
  return *r;
}

AgentState state_from(const std::string& s) {
  for (AgentState st : {AgentState::Probing, AgentState::Waiting,
                        AgentState::Done, AgentState::Failed}) {
    if (to_string(st) == s) return st;
  }
  throw std::runtime_error("unknown monitor state " + s);
}

ordered_json record_json(const TraceRecord& rec) {
  ordered_json hops = ordered_json::array();
  for (const Hop& hop : rec.hops) {
    ordered_json addrs = ordered_json::array();
    for (const auto& a : hop.addresses) addrs.push_back(a ? a->to_string() : "*");
    hops.push_back({{"ttl", hop.ttl}, {"addresses", addrs}, {"rtts", hop.rtts}});
  }
  return {{"source", rec.source.to_string()},
          {"destination", rec.destination.to_string()},
          {"timestamp", rec.timestamp},
          {"backward_reason", to_string(rec.backward_reason)},
          {"backward_stop_distance", rec.backward_stop_distance},
          {"forward_reason", to_string(rec.forward_reason)},
          {"forward_stop_distance", rec.forward_stop_distance},
          {"hops", hops}};
}

TraceRecord record_from(const ordered_json& j) {
  TraceRecord rec;
  rec.source = Address::from_string(j.at("source").get<std::string>());
  rec.destination = Address::from_string(j.at("destination").get<std::string>());
  rec.timestamp = j.at("timestamp").get<double>();
  rec.backward_reason = reason_from(j.at("backward_reason"));
  rec.backward_stop_distance = j.at("backward_stop_distance").get<int>();
  rec.forward_reason = reason_from(j.at("forward_reason"));
  rec.forward_stop_distance = j.at("forward_stop_distance").get<int>();
  for (const auto& h : j.at("hops")) {
    Hop hop;
    hop.ttl = h.at("ttl").get<int>();
    for (const auto& a : h.at("addresses")) {
      const auto s = a.get<std::string>();
      hop.addresses.push_back(s == "*" ? std::nullopt
                                       : std::optional(Address::from_string(s)));
    }
    hop.rtts = h.at("rtts").get<std::vector<double>>();
    rec.hops.push_back(std::move(hop));
  }
  return rec;
}

}  // namespace

std::string record_to_json(const TraceRecord& rec) {
  return record_json(rec).dump();
}

TraceRecord record_from_json(const std::string& line) {
  return record_from(ordered_json::parse(line));
}

void write_records(std::ostream& out, const std::vector<TraceRecord>& records) {
  for (const TraceRecord& rec : records) out << record_to_json(rec) << '\n';
}

std::vector<TraceRecord> read_records(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("record line " + std::to_string(n) + ": " +
                               e.what());
    }
  }
  return out;
}

void write_summaries(std::ostream& out,
                     const std::vector<MonitorSummary>& monitors) {
  ordered_json all = ordered_json::array();
  for (const MonitorSummary& s : monitors) {
    ordered_json transitions = ordered_json::array();
    for (const StateTransition& t : s.transitions) {
      transitions.push_back({{"at_s", t.at_s},
                             {"state", to_string(t.state)},
                             {"waiting_periods", t.waiting_periods},
                             {"probes_sent", t.probes_sent}});
    }
    all.push_back({{"id", s.id.to_string()},
                   {"final_state", to_string(s.final_state)},
                   {"failure", s.failure},
                   {"h_per_window", s.h_per_window},
                   {"estimation_probes", s.estimation_probes},
                   {"trace_probes", s.trace_probes},
                   {"finish_s", s.finish_s},
                   {"waiting_s", s.waiting_s},
                   {"waiting_periods", s.waiting_periods},
                   {"transitions", transitions}});
  }
  out << all.dump(2) << '\n';
}

std::vector<MonitorSummary> read_summaries(std::istream& in) {
  const ordered_json all = ordered_json::parse(in);
  std::vector<MonitorSummary> out;
  for (const auto& j : all) {
    MonitorSummary s;
    s.id = Address::from_string(j.at("id").get<std::string>());
    s.final_state = state_from(j.at("final_state").get<std::string>());
    s.failure = j.at("failure").get<std::string>();
    s.h_per_window = j.at("h_per_window").get<std::vector<int>>();
    s.estimation_probes = j.at("estimation_probes").get<std::uint64_t>();
    s.trace_probes = j.at("trace_probes").get<std::uint64_t>();
    s.finish_s = j.at("finish_s").get<double>();
    s.waiting_s = j.at("waiting_s").get<double>();
    s.waiting_periods = j.at("waiting_periods").get<int>();
    for (const auto& t : j.at("transitions")) {
      s.transitions.push_back({t.at("at_s").get<double>(),
                               state_from(t.at("state").get<std::string>()),
                               t.at("waiting_periods").get<int>(),
                               t.at("probes_sent").get<std::uint64_t>()});
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_message_log(std::ostream& out,
                       const std::vector<SentMessage>& messages) {
  for (const SentMessage& m : messages) {
    // %.6f keeps the log independent of iostream float formatting state.
    char ts[64];
    std::snprintf(ts, sizeof ts, "%.6f", m.sent_at_s);
    out << m.from.to_string() << ' ' << m.to.to_string() << ' ' << ts << ' '
        << int(m.window) << ' ' << int(m.slice) << ' ' << to_hex(m.bytes)
        << '\n';
  }
}

std::vector<SentMessage> read_message_log(std::istream& in) {
  std::vector<SentMessage> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string from, to, hex;
    double ts = 0;
    int window = 0, slice = 0;
    if (!(fields >> from >> to >> ts >> window >> slice) ||
        !std::getline(fields, hex)) {
      throw std::runtime_error("message log line " + std::to_string(n) +
                               ": expected 6 fields");
    }
    SentMessage m;
    m.from = Address::from_string(from);
    m.to = Address::from_string(to);
    m.sent_at_s = ts;
    m.window = static_cast<std::uint8_t>(window);
    m.slice = static_cast<std::uint8_t>(slice);
    m.bytes = from_hex(hex);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace dtree
