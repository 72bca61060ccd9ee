#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "dtree/address.hpp"
#include "dtree/probe.hpp"
#include "dtree/stopset.hpp"

namespace dtree {

/// TTL used to reach every destination when measuring path lengths.
inline constexpr int kEstimationTtl = 64;
/// Consecutive silent hops after which probing gives up.
inline constexpr int kGapLimit = 5;

enum class StopReason { Normal, StopSet, Loop, Gap };

[[nodiscard]] std::string_view to_string(StopReason r);
[[nodiscard]] std::optional<StopReason> parse_stop_reason(std::string_view s);

/// One probed TTL. The address list keeps room for three responders per
/// TTL; nullopt is a non-responding slot ("*") and carries no RTT.
struct Hop {
  int ttl = 0;
  std::vector<std::optional<Address>> addresses;
  std::vector<double> rtts;
  friend bool operator==(const Hop&, const Hop&) = default;
};

struct TraceRecord {
  Address source;
  Address destination;
  double timestamp = 0.0;
  StopReason backward_reason = StopReason::Normal;
  int backward_stop_distance = 0;
  StopReason forward_reason = StopReason::Normal;
  int forward_stop_distance = 0;
  std::vector<Hop> hops;  ///< Sorted by ttl.
  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

class EmptyCdfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Distribution of hop distances to the destinations of a window. F(d) is
/// the fraction of all probed destinations whose distance is at most d, so
/// it tops out at the fraction that answered.
class PathLengthCdf {
 public:
  void add_length(int hops);
  void add_silent() { ++silent_; }

  [[nodiscard]] double at(int d) const;
  [[nodiscard]] int max_distance() const;
  [[nodiscard]] std::size_t responded() const { return responded_; }
  [[nodiscard]] std::size_t probed() const { return responded_ + silent_; }
  [[nodiscard]] bool empty() const { return responded_ == 0; }
  [[nodiscard]] const std::map<int, std::size_t>& counts() const {
    return counts_;
  }

 private:
  std::map<int, std::size_t> counts_;
  std::size_t responded_ = 0;
  std::size_t silent_ = 0;
};

/// One probe per destination at TTL 64; a destination-unreachable reply
/// carrying remaining TTL r puts the destination at 64 - r + 1 hops.
/// Throws std::invalid_argument for an empty list and EmptyCdfError when
/// nothing answered.
[[nodiscard]] PathLengthCdf estimate_path_lengths(ProbeService& svc,
                                                  std::span<const Address> dests);

/// Largest d in [1, max distance] with F(d) <= p, or 1 if there is none.
[[nodiscard]] int choose_h(const PathLengthCdf& cdf, double p);

/// Forwards stopping rule. A repeat within the trace is a Loop even though
/// its pair is already in `global`. `consecutive_timeouts` counts the
/// current reply if it is a timeout. Call before inserting the reply's pair.
[[nodiscard]] std::optional<StopReason> decide_forward_stop(
    const ProbeReply& reply, PairKey reply_key, const GlobalStopSet& global,
    std::span<const Address> path_so_far, int consecutive_timeouts);

/// Backwards stopping rule, consulting only the local stop set.
[[nodiscard]] std::optional<StopReason> decide_backward_stop(
    const ProbeReply& reply, const LocalStopSet& local, int ttl,
    std::span<const Address> path_so_far, int consecutive_timeouts);

struct TraceOutcome {
  TraceRecord record;
  /// (responder, destination key) for every responding hop, in probe order.
  std::vector<PairKey> new_pairs;
  std::uint64_t probes = 0;
};

/// Forwards from ttl=h until a stop, then backwards from h-1. Pairs go into
/// `global` as replies arrive; backwards responders also go into `local`.
/// With h=1 there is no backwards phase and the record says Normal at 0.
[[nodiscard]] TraceOutcome probe_destination(Address source, Address dest,
                                             int h, LocalStopSet& local,
                                             GlobalStopSet& global,
                                             ProbeService& svc,
                                             double timestamp);

}  // namespace dtree
