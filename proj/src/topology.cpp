#include "dtree/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_set>

#include "dtree/errors.hpp"
#include "rng.hpp"

namespace dtree {

namespace {

constexpr int kMaxRouteLength = 255;

std::string pair_name(Address monitor, Address dest) {
  return monitor.to_string() + " -> " + dest.to_string();
}

}  // namespace

void SimTopology::add_route(Address monitor, Address dest, Route route) {
  if (route.hops.empty()) {
    throw TopologyError("route " + pair_name(monitor, dest) + " is empty");
  }
  if (route.length() > kMaxRouteLength) {
    throw TopologyError("route " + pair_name(monitor, dest) +
                        " is longer than " + std::to_string(kMaxRouteLength) +
                        " hops");
  }
  if (route.hops.back() != dest) {
    throw TopologyError("route " + pair_name(monitor, dest) +
                        " does not end at its destination (last hop " +
                        route.hops.back().to_string() + ")");
  }
  routes_[{monitor, dest}] = std::move(route);
}

void SimTopology::set_monitors(std::vector<Address> monitors) {
  monitors_ = std::move(monitors);
}

void SimTopology::set_destinations(std::vector<Address> destinations) {
  destinations_ = std::move(destinations);
}

const Route* SimTopology::find_route(Address monitor, Address dest) const {
  auto it = routes_.find({monitor, dest});
  return it == routes_.end() ? nullptr : &it->second;
}

const Route& SimTopology::route(Address monitor, Address dest) const {
  const Route* r = find_route(monitor, dest);
  if (r == nullptr) {
    throw ContractViolation("no route for " + pair_name(monitor, dest));
  }
  return *r;
}

std::map<Address, bool> SimTopology::responders() const {
  std::map<Address, bool> out;
  for (const auto& [key, r] : routes_) {
    for (Address hop : r.hops) out.emplace(hop, responds(hop));
  }
  return out;
}

double SimTopology::rtt_ms(Address responder, Address monitor) const {
  const std::uint64_t h = detail::splitmix64(
      seed_ ^ detail::splitmix64((std::uint64_t{responder.value} << 32) |
                                 monitor.value));
  const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
  const double rtt = rtt_.min_ms + unit * (rtt_.max_ms - rtt_.min_ms);
  return std::round(rtt * 1000.0) / 1000.0;
}

ProbeReply SimTopology::probe(Address monitor, Address dest, int ttl) const {
  if (ttl < 1) throw ContractViolation("probe TTL must be at least 1");
  const Route& r = route(monitor, dest);
  const int length = r.length();
  if (ttl < length) {
    const Address hop = r.hops[static_cast<std::size_t>(ttl - 1)];
    if (!responds(hop)) return ProbeReply::timeout();
    return {ReplyKind::TimeExceeded, hop, rtt_ms(hop, monitor), std::nullopt};
  }
  if (!responds(dest)) return ProbeReply::timeout();
  return {ReplyKind::DestinationUnreachable, dest, rtt_ms(dest, monitor),
          ttl - length + 1};
}

void SimTopology::validate_complete() const {
  for (Address m : monitors_) {
    for (Address d : destinations_) {
      if (find_route(m, d) == nullptr) {
        throw TopologyError("missing route " + pair_name(m, d));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Generator

namespace {

struct Edge {
  std::size_t to;
  double weight;
};

bool usable_public(Address a) {
  return !a.is_invalid() && (a.value >> 24) < 224 && (a.value >> 24) != 100;
}

class AddressAllocator {
 public:
  explicit AddressAllocator(detail::Rng& rng) : rng_(rng) {}

  Address public_address() {
    for (;;) {
      Address a{static_cast<std::uint32_t>(rng_.next() >> 32)};
      if (usable_public(a) && used_.insert(a).second) return a;
    }
  }

  Address private_address() {
    for (;;) {
      Address a{Address(10, 0, 0, 0).value |
                static_cast<std::uint32_t>(rng_.below(1u << 24))};
      if (used_.insert(a).second) return a;
    }
  }

 private:
  detail::Rng& rng_;
  std::unordered_set<Address> used_;
};

void check_fraction(const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw TopologyError(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

SimTopology generate_topology(int num_monitors, int num_destinations,
                              const GeneratorParams& params,
                              std::uint64_t seed) {
  if (num_monitors < 1) throw TopologyError("need at least one monitor");
  if (num_destinations < 1) {
    throw TopologyError("need at least one destination");
  }
  if (params.routers < 1) {
    throw TopologyError("need at least one router to connect hosts");
  }
  if (params.extra_links < 0) {
    throw TopologyError("extra_links must be non-negative");
  }
  const auto r = static_cast<std::uint64_t>(params.routers);
  const std::uint64_t max_chords = r * (r - 1) / 2 - (r - 1);
  if (static_cast<std::uint64_t>(params.extra_links) > max_chords) {
    throw TopologyError("extra_links exceeds what " +
                        std::to_string(params.routers) +
                        " routers can hold without parallel links");
  }
  const std::uint64_t total_nodes = r + static_cast<std::uint64_t>(
                                            num_monitors + num_destinations);
  if (total_nodes > (1u << 24)) {
    throw TopologyError("too many nodes for the address allocator");
  }
  check_fraction("nonresponder_fraction", params.nonresponder_fraction);
  check_fraction("dest_nonresponder_fraction",
                 params.dest_nonresponder_fraction);
  check_fraction("private_fraction", params.private_fraction);
  if (!(params.rtt.min_ms >= 0.0 && params.rtt.min_ms <= params.rtt.max_ms)) {
    throw TopologyError("rtt range must satisfy 0 <= min <= max");
  }

  detail::Rng rng(seed);
  AddressAllocator alloc(rng);

  const std::size_t routers = static_cast<std::size_t>(params.routers);
  const std::size_t monitors = static_cast<std::size_t>(num_monitors);
  const std::size_t dests = static_cast<std::size_t>(num_destinations);
  const std::size_t nodes = routers + monitors + dests;

  std::vector<Address> addr(nodes);
  for (std::size_t i = 0; i < routers; ++i) {
    addr[i] = rng.unit() < params.private_fraction ? alloc.private_address()
                                                   : alloc.public_address();
  }
  for (std::size_t i = routers; i < nodes; ++i) addr[i] = alloc.public_address();

  std::vector<std::vector<Edge>> adj(nodes);
  std::set<std::pair<std::size_t, std::size_t>> linked;
  auto link = [&](std::size_t a, std::size_t b) {
    const double w = 1.0 + 0.5 * rng.unit();
    adj[a].push_back({b, w});
    adj[b].push_back({a, w});
    linked.insert({std::min(a, b), std::max(a, b)});
  };

  for (std::size_t i = 1; i < routers; ++i) link(rng.below(i), i);
  for (int added = 0; added < params.extra_links;) {
    const std::size_t a = rng.below(routers);
    const std::size_t b = rng.below(routers);
    if (a == b || linked.contains({std::min(a, b), std::max(a, b)})) continue;
    link(a, b);
    ++added;
  }
  for (std::size_t host = routers; host < nodes; ++host) {
    link(host, rng.below(routers));
  }

  SimTopology topo;
  topo.set_seed(seed);
  topo.set_rtt_range(params.rtt);

  for (std::size_t i = 0; i < routers; ++i) {
    if (rng.unit() < params.nonresponder_fraction) {
      topo.set_nonresponder(addr[i]);
    }
  }
  std::vector<Address> monitor_list, dest_list;
  for (std::size_t i = 0; i < monitors; ++i) {
    monitor_list.push_back(addr[routers + i]);
  }
  for (std::size_t i = 0; i < dests; ++i) {
    const Address d = addr[routers + monitors + i];
    dest_list.push_back(d);
    if (rng.unit() < params.dest_nonresponder_fraction) {
      topo.set_nonresponder(d);
    }
  }

  // Hosts are degree-1 leaves, so they never show up as transit hops.
  for (std::size_t mi = 0; mi < monitors; ++mi) {
    const std::size_t src = routers + mi;
    std::vector<double> dist(nodes, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> parent(nodes, nodes);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[src] = 0.0;
    queue.push({0.0, src});
    while (!queue.empty()) {
      auto [d, u] = queue.top();
      queue.pop();
      if (d > dist[u]) continue;
      if (u != src && u >= routers) continue;  // do not route through hosts
      for (const Edge& e : adj[u]) {
        if (d + e.weight < dist[e.to]) {
          dist[e.to] = d + e.weight;
          parent[e.to] = u;
          queue.push({dist[e.to], e.to});
        }
      }
    }
    for (std::size_t di = 0; di < dests; ++di) {
      const std::size_t dst = routers + monitors + di;
      Route route;
      for (std::size_t v = dst; v != src; v = parent[v]) {
        route.hops.push_back(addr[v]);
      }
      std::reverse(route.hops.begin(), route.hops.end());
      topo.add_route(addr[src], addr[dst], std::move(route));
    }
  }

  topo.set_monitors(std::move(monitor_list));
  topo.set_destinations(std::move(dest_list));
  return topo;
}

// ---------------------------------------------------------------------------
// Text format

void write_topology(std::ostream& out, const SimTopology& topo) {
  out << "# doubletree topology\n";
  out << "seed " << topo.seed() << '\n';
  {
    std::ostringstream rtt;
    rtt.precision(17);
    rtt << "rtt " << topo.rtt_range().min_ms << ' ' << topo.rtt_range().max_ms;
    out << rtt.str() << '\n';
  }
  for (Address m : topo.monitors()) out << "monitor " << m.to_string() << '\n';
  for (Address d : topo.destinations()) {
    out << "destination " << d.to_string() << '\n';
  }
  for (Address a : topo.nonresponders()) {
    out << "nonresponder " << a.to_string() << '\n';
  }
  for (const auto& [key, route] : topo.routes()) {
    out << key.first.to_string() << ' ' << key.second.to_string();
    for (Address hop : route.hops) out << ' ' << hop.to_string();
    out << '\n';
  }
}

namespace {

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& line,
                             const std::string& why) {
  throw TopologyError("line " + std::to_string(line_no) + ": " + why +
                      " in '" + line + "'");
}

Address parse_addr(std::size_t line_no, const std::string& line,
                   const std::string& token) {
  auto a = Address::parse(token);
  if (!a) parse_fail(line_no, line, "malformed address '" + token + "'");
  return *a;
}

}  // namespace

SimTopology read_topology(std::istream& in) {
  SimTopology topo;
  std::vector<Address> monitors, dests;
  std::vector<Address> seen_monitors, seen_dests;
  std::unordered_set<Address> seen_m, seen_d;
  bool explicit_monitors = false, explicit_dests = false;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string content = line.substr(0, line.find('#'));
    std::istringstream fields(content);
    std::vector<std::string> tokens;
    for (std::string t; fields >> t;) tokens.push_back(t);
    if (tokens.empty()) continue;

    const std::string& head = tokens[0];
    if (head == "seed") {
      if (tokens.size() != 2) parse_fail(line_no, line, "expected 'seed <n>'");
      try {
        std::size_t used = 0;
        topo.set_seed(std::stoull(tokens[1], &used));
        if (used != tokens[1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        parse_fail(line_no, line, "bad seed");
      }
    } else if (head == "rtt") {
      if (tokens.size() != 3) {
        parse_fail(line_no, line, "expected 'rtt <min> <max>'");
      }
      RttRange r;
      try {
        r.min_ms = std::stod(tokens[1]);
        r.max_ms = std::stod(tokens[2]);
      } catch (const std::exception&) {
        parse_fail(line_no, line, "bad rtt bound");
      }
      if (!(r.min_ms >= 0 && r.min_ms <= r.max_ms)) {
        parse_fail(line_no, line, "rtt bounds out of order");
      }
      topo.set_rtt_range(r);
    } else if (head == "monitor" || head == "destination" ||
               head == "nonresponder") {
      if (tokens.size() != 2) {
        parse_fail(line_no, line, "expected '" + head + " <addr>'");
      }
      const Address a = parse_addr(line_no, line, tokens[1]);
      if (head == "monitor") {
        explicit_monitors = true;
        monitors.push_back(a);
      } else if (head == "destination") {
        explicit_dests = true;
        dests.push_back(a);
      } else {
        topo.set_nonresponder(a);
      }
    } else {
      if (tokens.size() < 3) {
        parse_fail(line_no, line,
                   "route needs a monitor, a destination and at least one hop");
      }
      const Address m = parse_addr(line_no, line, tokens[0]);
      const Address d = parse_addr(line_no, line, tokens[1]);
      Route route;
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        route.hops.push_back(parse_addr(line_no, line, tokens[i]));
      }
      try {
        topo.add_route(m, d, std::move(route));
      } catch (const TopologyError& e) {
        parse_fail(line_no, line, e.what());
      }
      if (seen_m.insert(m).second) seen_monitors.push_back(m);
      if (seen_d.insert(d).second) seen_dests.push_back(d);
    }
  }

  topo.set_monitors(explicit_monitors ? std::move(monitors)
                                      : std::move(seen_monitors));
  topo.set_destinations(explicit_dests ? std::move(dests)
                                       : std::move(seen_dests));
  topo.validate_complete();
  return topo;
}

void save_topology(const SimTopology& topo, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TopologyError("cannot open '" + path.string() + "' for writing");
  write_topology(out, topo);
  if (!out) throw TopologyError("failed writing '" + path.string() + "'");
}

SimTopology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TopologyError("cannot open topology file '" + path.string() + "'");
  try {
    return read_topology(in);
  } catch (const TopologyError& e) {
    throw TopologyError(path.string() + ": " + e.what());
  }
}

}  // namespace dtree
