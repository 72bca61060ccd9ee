#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dtree/coordinator.hpp"
#include "dtree/doubletree.hpp"
#include "dtree/topology.hpp"

namespace dtree {

/// An undirected link between two interfaces, stored with a <= b.
struct Link {
  Address a;
  Address b;
  [[nodiscard]] static Link between(Address x, Address y) {
    return x < y ? Link{x, y} : Link{y, x};
  }
  friend constexpr auto operator<=>(Link, Link) = default;
};

struct DiscoveredTopology {
  std::set<Address> nodes;
  std::set<Link> links;
};

/// Nodes are responding interfaces other than the record's destination.
/// Links join responders at adjacent TTLs; a star breaks the chain.
[[nodiscard]] DiscoveredTopology discovered_topology(
    std::span<const TraceRecord> records);

/// Classic hop-by-hop probing from every monitor to every destination.
struct OracleResult {
  std::set<Address> nodes;
  std::set<Link> links;
  std::uint64_t probe_count = 0;
  std::map<Address, std::uint64_t> per_interface_visits;
  std::map<Address, std::uint64_t> per_destination_probes;
  std::vector<TraceRecord> traces;
};

/// Probes ttl = 1, 2, ... until the destination answers or five hops in a
/// row stay silent.
[[nodiscard]] OracleResult classic_oracle(const SimTopology& topo,
                                          std::span<const Address> monitors,
                                          std::span<const Address> dests);

inline constexpr std::array<StopReason, 4> kReportReasonOrder = {
    StopReason::Loop, StopReason::Gap, StopReason::StopSet,
    StopReason::Normal};

struct StoppingRow {
  Address monitor;
  std::size_t records = 0;
  /// Percentages in kReportReasonOrder.
  std::array<double, 4> backward{};
  std::array<double, 4> forward{};
  double mean_h = 0.0;
};

struct DistanceHistogram {
  Address monitor;
  std::map<int, std::size_t> backward;
  std::map<int, std::size_t> forward;
};

struct MessageTotals {
  Address monitor;
  std::size_t messages = 0;
  std::size_t bytes = 0;  ///< Headers included.
};

struct RunMetrics {
  std::size_t nodes_discovered = 0;
  std::size_t links_discovered = 0;
  std::size_t non_responding = 0;     ///< Star slots across all records.
  std::size_t invalid_addresses = 0;  ///< Distinct private/reserved responders.
  double node_coverage = 0.0;
  double link_coverage = 0.0;
  /// 1 - trace probes / oracle probes.
  double load_reduction = 0.0;
  /// Same, with the path-length estimation probes charged to Doubletree.
  double load_reduction_with_estimation = 0.0;
  std::uint64_t trace_probes = 0;
  std::uint64_t estimation_probes = 0;
  std::uint64_t oracle_probes = 0;
  std::size_t oracle_nodes = 0;
  std::size_t oracle_links = 0;
  std::vector<StoppingRow> stopping;
  std::vector<DistanceHistogram> histograms;
  std::vector<MessageTotals> messages;
};

[[nodiscard]] RunMetrics compute_metrics(const RunArtifacts& run,
                                         const OracleResult& oracle);

enum class ReportFormat { Table, Lines };

[[nodiscard]] std::string report(const RunMetrics& metrics,
                                 ReportFormat format);

}  // namespace dtree
