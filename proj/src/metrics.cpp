#include "dtree/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dtree {

DiscoveredTopology discovered_topology(std::span<const TraceRecord> records) {
  DiscoveredTopology out;
  for (const TraceRecord& rec : records) {
    std::optional<Address> prev;
    int prev_ttl = -1;
    for (const Hop& hop : rec.hops) {
      std::optional<Address> here;
      for (const auto& a : hop.addresses) {
        if (a) {
          here = a;
          break;
        }
      }
      if (here && *here != rec.destination) out.nodes.insert(*here);
      if (here && prev && prev_ttl + 1 == hop.ttl && *prev != *here) {
        out.links.insert(Link::between(*prev, *here));
      }
      prev = here;
      prev_ttl = hop.ttl;
    }
  }
  return out;
}

OracleResult classic_oracle(const SimTopology& topo,
                            std::span<const Address> monitors,
                            std::span<const Address> dests) {
  OracleResult out;
  for (Address m : monitors) {
    for (Address d : dests) {
      TraceRecord rec;
      rec.source = m;
      rec.destination = d;
      int silent = 0;
      for (int ttl = 1;; ++ttl) {
        const ProbeReply reply = topo.probe(m, d, ttl);
        ++out.probe_count;
        ++out.per_destination_probes[d];
        Hop hop;
        hop.ttl = ttl;
        hop.addresses.push_back(reply.responder);
        if (reply.rtt_ms) hop.rtts.push_back(*reply.rtt_ms);
        rec.hops.push_back(std::move(hop));
        if (reply.responded()) {
          silent = 0;
          ++out.per_interface_visits[*reply.responder];
          if (reply.kind == ReplyKind::DestinationUnreachable) {
            rec.forward_reason = StopReason::Normal;
            rec.forward_stop_distance = ttl;
            break;
          }
        } else if (++silent == kGapLimit) {
          rec.forward_reason = StopReason::Gap;
          rec.forward_stop_distance = ttl;
          break;
        }
      }
      out.traces.push_back(std::move(rec));
    }
  }
  DiscoveredTopology found = discovered_topology(out.traces);
  out.nodes = std::move(found.nodes);
  out.links = std::move(found.links);
  return out;
}

namespace {

std::size_t reason_slot(StopReason r) {
  return static_cast<std::size_t>(
      std::find(kReportReasonOrder.begin(), kReportReasonOrder.end(), r) -
      kReportReasonOrder.begin());
}

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

template <typename T>
std::size_t intersection_size(const std::set<T>& a, const std::set<T>& b) {
  std::size_t n = 0;
  for (const T& x : a) n += b.contains(x) ? 1 : 0;
  return n;
}

}  // namespace

RunMetrics compute_metrics(const RunArtifacts& run,
                           const OracleResult& oracle) {
  RunMetrics m;
  const DiscoveredTopology found = discovered_topology(run.records);
  m.nodes_discovered = found.nodes.size();
  m.links_discovered = found.links.size();
  m.oracle_nodes = oracle.nodes.size();
  m.oracle_links = oracle.links.size();
  m.node_coverage = ratio(static_cast<double>(intersection_size(found.nodes, oracle.nodes)),
                          static_cast<double>(oracle.nodes.size()));
  m.link_coverage = ratio(static_cast<double>(intersection_size(found.links, oracle.links)),
                          static_cast<double>(oracle.links.size()));

  std::set<Address> invalid;
  for (const TraceRecord& rec : run.records) {
    for (const Hop& hop : rec.hops) {
      m.trace_probes += 1;
      for (const auto& a : hop.addresses) {
        if (!a) {
          ++m.non_responding;
        } else if (a->is_invalid()) {
          invalid.insert(*a);
        }
      }
    }
  }
  m.invalid_addresses = invalid.size();
  for (const MonitorSummary& s : run.monitors) m.estimation_probes += s.estimation_probes;
  m.oracle_probes = oracle.probe_count;
  if (oracle.probe_count > 0) {
    const double op = static_cast<double>(oracle.probe_count);
    m.load_reduction = 1.0 - static_cast<double>(m.trace_probes) / op;
    m.load_reduction_with_estimation =
        1.0 - static_cast<double>(m.trace_probes + m.estimation_probes) / op;
  }

  for (const MonitorSummary& s : run.monitors) {
    StoppingRow row;
    row.monitor = s.id;
    DistanceHistogram hist;
    hist.monitor = s.id;
    std::array<std::size_t, 4> back{}, fwd{};
    for (const TraceRecord& rec : run.records) {
      if (rec.source != s.id) continue;
      ++row.records;
      ++back[reason_slot(rec.backward_reason)];
      ++fwd[reason_slot(rec.forward_reason)];
      ++hist.backward[rec.backward_stop_distance];
      ++hist.forward[rec.forward_stop_distance];
    }
    for (std::size_t i = 0; i < 4; ++i) {
      row.backward[i] = 100.0 * ratio(static_cast<double>(back[i]),
                                      static_cast<double>(row.records));
      row.forward[i] = 100.0 * ratio(static_cast<double>(fwd[i]),
                                     static_cast<double>(row.records));
    }
    if (!s.h_per_window.empty()) {
      double sum = 0;
      for (int h : s.h_per_window) sum += h;
      row.mean_h = sum / static_cast<double>(s.h_per_window.size());
    }
    m.stopping.push_back(row);
    m.histograms.push_back(std::move(hist));

    MessageTotals totals{s.id, 0, 0};
    for (const SentMessage& msg : run.messages) {
      if (msg.from != s.id) continue;
      ++totals.messages;
      totals.bytes += msg.bytes.size();
    }
    m.messages.push_back(totals);
  }
  return m;
}

// ---------------------------------------------------------------------------

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return left ? s + fill : fill + s;
}

std::string render_table(const RunMetrics& m) {
  std::ostringstream out;
  out << "Stopping reasons (%) and h per monitor\n";
  out << pad("", 16, true) << "| " << pad("backwards", 31, true) << "| "
      << pad("forwards", 31, true) << "|\n";
  out << pad("monitor", 16, true) << "|";
  for (int dir = 0; dir < 2; ++dir) {
    out << pad("loop", 7) << pad("gap", 7) << pad("stop set", 9)
        << pad("normal", 8) << " |";
  }
  out << pad("h", 6) << pad("records", 9) << '\n';
  out << std::string(16, '-') << '+' << std::string(32, '-') << '+'
      << std::string(32, '-') << '+' << std::string(15, '-') << '\n';

  std::array<double, 4> mean_back{}, mean_fwd{};
  double mean_h = 0;
  for (const StoppingRow& row : m.stopping) {
    out << pad(row.monitor.to_string(), 16, true) << "|";
    for (const auto* cols : {&row.backward, &row.forward}) {
      out << pad(fixed((*cols)[0], 1), 7) << pad(fixed((*cols)[1], 1), 7)
          << pad(fixed((*cols)[2], 1), 9) << pad(fixed((*cols)[3], 1), 8)
          << " |";
    }
    out << pad(fixed(row.mean_h, 1), 6) << pad(std::to_string(row.records), 9)
        << '\n';
    for (std::size_t i = 0; i < 4; ++i) {
      mean_back[i] += row.backward[i];
      mean_fwd[i] += row.forward[i];
    }
    mean_h += row.mean_h;
  }
  const double rows = static_cast<double>(m.stopping.size());
  out << std::string(16, '-') << '+' << std::string(32, '-') << '+'
      << std::string(32, '-') << '+' << std::string(15, '-') << '\n';
  out << pad("mean", 16, true) << "|";
  for (const auto* cols : {&mean_back, &mean_fwd}) {
    out << pad(fixed(ratio((*cols)[0], rows), 2), 7)
        << pad(fixed(ratio((*cols)[1], rows), 2), 7)
        << pad(fixed(ratio((*cols)[2], rows), 2), 9)
        << pad(fixed(ratio((*cols)[3], rows), 2), 8) << " |";
  }
  out << pad(fixed(ratio(mean_h, rows), 1), 6) << '\n';

  out << "\nStopSet message totals per monitor\n";
  out << pad("monitor", 16, true) << pad("messages", 10) << pad("bytes", 12)
      << pad("KB", 10) << '\n';
  std::size_t all_bytes = 0;
  for (const MessageTotals& t : m.messages) {
    out << pad(t.monitor.to_string(), 16, true)
        << pad(std::to_string(t.messages), 10)
        << pad(std::to_string(t.bytes), 12)
        << pad(fixed(static_cast<double>(t.bytes) / 1024.0, 2), 10) << '\n';
    all_bytes += t.bytes;
  }
  out << pad("mean", 16, true) << pad("", 10)
      << pad(fixed(ratio(static_cast<double>(all_bytes),
                         static_cast<double>(m.messages.size())),
                   1),
             12)
      << pad(fixed(ratio(static_cast<double>(all_bytes) / 1024.0,
                         static_cast<double>(m.messages.size())),
                   2),
             10)
      << '\n';

  out << "\nDiscovery versus classic probing\n";
  out << "  nodes discovered        " << m.nodes_discovered << " of "
      << m.oracle_nodes << '\n';
  out << "  links discovered        " << m.links_discovered << " of "
      << m.oracle_links << '\n';
  out << "  node coverage           " << fixed(m.node_coverage, 4) << '\n';
  out << "  link coverage           " << fixed(m.link_coverage, 4) << '\n';
  out << "  non-responding hops     " << m.non_responding << '\n';
  out << "  invalid addresses       " << m.invalid_addresses << '\n';
  out << "  trace probes            " << m.trace_probes << '\n';
  out << "  estimation probes       " << m.estimation_probes << '\n';
  out << "  classic probes          " << m.oracle_probes << '\n';
  out << "  load reduction          " << fixed(m.load_reduction, 4) << '\n';
  out << "  load reduction (+est.)  "
      << fixed(m.load_reduction_with_estimation, 4) << '\n';

  out << "\nStopping distance histograms\n";
  out << pad("monitor", 16, true) << pad("direction", 11) << pad("distance", 10)
      << pad("count", 8) << '\n';
  for (const DistanceHistogram& h : m.histograms) {
    for (const auto& [label, counts] :
         {std::pair{"backwards", &h.backward}, std::pair{"forwards", &h.forward}}) {
      for (const auto& [distance, n] : *counts) {
        out << pad(h.monitor.to_string(), 16, true) << pad(label, 11)
            << pad(std::to_string(distance), 10) << pad(std::to_string(n), 8)
            << '\n';
      }
    }
  }
  return out.str();
}

nlohmann::ordered_json reason_columns(const std::array<double, 4>& pct) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < 4; ++i) {
    j[std::string(to_string(kReportReasonOrder[i]))] = pct[i];
  }
  return j;
}

std::string render_lines(const RunMetrics& m) {
  std::ostringstream out;
  nlohmann::ordered_json summary = {
      {"kind", "summary"},
      {"nodes_discovered", m.nodes_discovered},
      {"links_discovered", m.links_discovered},
      {"oracle_nodes", m.oracle_nodes},
      {"oracle_links", m.oracle_links},
      {"node_coverage", m.node_coverage},
      {"link_coverage", m.link_coverage},
      {"non_responding", m.non_responding},
      {"invalid_addresses", m.invalid_addresses},
      {"trace_probes", m.trace_probes},
      {"estimation_probes", m.estimation_probes},
      {"oracle_probes", m.oracle_probes},
      {"load_reduction", m.load_reduction},
      {"load_reduction_with_estimation", m.load_reduction_with_estimation}};
  out << summary.dump() << '\n';
  for (const StoppingRow& row : m.stopping) {
    nlohmann::ordered_json j = {{"kind", "stopping"},
                                {"monitor", row.monitor.to_string()},
                                {"records", row.records},
                                {"backward", reason_columns(row.backward)},
                                {"forward", reason_columns(row.forward)},
                                {"h", row.mean_h}};
    out << j.dump() << '\n';
  }
  for (const DistanceHistogram& h : m.histograms) {
    for (const auto& [label, counts] :
         {std::pair{"backward", &h.backward}, std::pair{"forward", &h.forward}}) {
      for (const auto& [distance, n] : *counts) {
        nlohmann::ordered_json j = {{"kind", "histogram"},
                                    {"monitor", h.monitor.to_string()},
                                    {"direction", label},
                                    {"distance", distance},
                                    {"count", n}};
        out << j.dump() << '\n';
      }
    }
  }
  for (const MessageTotals& t : m.messages) {
    nlohmann::ordered_json j = {{"kind", "messages"},
                                {"monitor", t.monitor.to_string()},
                                {"messages", t.messages},
                                {"bytes", t.bytes}};
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace

std::string report(const RunMetrics& metrics, ReportFormat format) {
  return format == ReportFormat::Table ? render_table(metrics)
                                       : render_lines(metrics);
}

}  // namespace dtree
