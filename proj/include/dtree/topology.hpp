#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "dtree/address.hpp"

namespace dtree {

/// Interfaces seen on the way from a monitor to a destination. hops[0] is at
/// TTL 1 and hops.back() is the destination itself.
struct Route {
  std::vector<Address> hops;

  [[nodiscard]] int length() const { return static_cast<int>(hops.size()); }
  friend bool operator==(const Route&, const Route&) = default;
};

enum class ReplyKind { TimeExceeded, DestinationUnreachable, Timeout };

struct ProbeReply {
  ReplyKind kind = ReplyKind::Timeout;
  std::optional<Address> responder;  ///< Absent iff Timeout.
  std::optional<double> rtt_ms;      ///< Absent iff Timeout.
  /// TTL the probe still carried when it reached the destination. Only set
  /// for DestinationUnreachable.
  std::optional<int> remaining_ttl;

  [[nodiscard]] static ProbeReply timeout() { return {}; }
  [[nodiscard]] bool responded() const { return kind != ReplyKind::Timeout; }
  friend bool operator==(const ProbeReply&, const ProbeReply&) = default;
};

struct RttRange {
  double min_ms = 5.0;
  double max_ms = 300.0;
  friend bool operator==(const RttRange&, const RttRange&) = default;
};

/// Knobs for generate_topology(). Routers form a random connected graph
/// (a random spanning tree plus `extra_links` chords); monitors and
/// destinations are stub hosts hanging off a single access router each.
struct GeneratorParams {
  int routers = 400;
  int extra_links = 200;
  /// Fraction of routers that never answer probes.
  double nonresponder_fraction = 0.03;
  /// Fraction of destinations that never answer probes.
  double dest_nonresponder_fraction = 0.05;
  /// Fraction of routers numbered out of private/reserved space.
  double private_fraction = 0.0;
  RttRange rtt;
};

/// Immutable-after-construction routing snapshot plus per-interface
/// responsiveness. Safe for concurrent readers.
class SimTopology {
 public:
  /// Adds a route; throws TopologyError when it is empty, too long for a TTL,
  /// or does not end at `dest`.
  void add_route(Address monitor, Address dest, Route route);
  void set_nonresponder(Address a) { nonresponders_.insert(a); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void set_rtt_range(RttRange r) { rtt_ = r; }
  /// Explicit ordering of the run's monitor and destination lists.
  void set_monitors(std::vector<Address> monitors);
  void set_destinations(std::vector<Address> destinations);

  [[nodiscard]] const Route* find_route(Address monitor, Address dest) const;
  /// Throws ContractViolation for an unknown pair.
  [[nodiscard]] const Route& route(Address monitor, Address dest) const;
  [[nodiscard]] bool responds(Address a) const {
    return !nonresponders_.contains(a);
  }
  /// Every interface appearing on some route, mapped to whether it replies.
  [[nodiscard]] std::map<Address, bool> responders() const;

  /// What a probe with `ttl` toward `dest` from `monitor` elicits.
  [[nodiscard]] ProbeReply probe(Address monitor, Address dest, int ttl) const;

  /// Synthetic RTT: a seeded hash of (responder, monitor) scaled into the
  /// configured range.
  [[nodiscard]] double rtt_ms(Address responder, Address monitor) const;

  [[nodiscard]] const std::vector<Address>& monitors() const {
    return monitors_;
  }
  [[nodiscard]] const std::vector<Address>& destinations() const {
    return destinations_;
  }
  [[nodiscard]] const std::map<std::pair<Address, Address>, Route>& routes()
      const {
    return routes_;
  }
  [[nodiscard]] const std::set<Address>& nonresponders() const {
    return nonresponders_;
  }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] RttRange rtt_range() const { return rtt_; }

  /// Checks that every listed monitor has a route to every listed
  /// destination. Throws TopologyError otherwise.
  void validate_complete() const;

  friend bool operator==(const SimTopology&, const SimTopology&) = default;

 private:
  std::map<std::pair<Address, Address>, Route> routes_;
  std::set<Address> nonresponders_;
  std::vector<Address> monitors_;
  std::vector<Address> destinations_;
  std::uint64_t seed_ = 0;
  RttRange rtt_;
};

/// Deterministic random topology. Routes are unique shortest paths under
/// random link weights, so routes out of a monitor form a tree and routes
/// into a destination form a tree.
[[nodiscard]] SimTopology generate_topology(int num_monitors,
                                            int num_destinations,
                                            const GeneratorParams& params,
                                            std::uint64_t seed);

/// Line-oriented text format:
///
///     seed <u64>
///     rtt <min_ms> <max_ms>
///     monitor <addr>
///     destination <addr>
///     nonresponder <addr>
///     <monitor> <dest> <hop1> ... <hopL>
///
/// `#` starts a comment. Only route lines are required.
void write_topology(std::ostream& out, const SimTopology& topo);
[[nodiscard]] SimTopology read_topology(std::istream& in);

void save_topology(const SimTopology& topo, const std::filesystem::path& path);
[[nodiscard]] SimTopology load_topology(const std::filesystem::path& path);

}  // namespace dtree
