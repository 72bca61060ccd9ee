#include "dtree/doubletree.hpp"

#include <algorithm>

#include "dtree/errors.hpp"

namespace dtree {

namespace {

constexpr int kMaxTtl = 255;

bool seen_on_path(std::span<const Address> path, Address a) {
  return std::find(path.begin(), path.end(), a) != path.end();
}

Hop make_hop(int ttl, const ProbeReply& reply) {
  Hop hop;
  hop.ttl = ttl;
  hop.addresses.push_back(reply.responder);
  if (reply.rtt_ms) hop.rtts.push_back(*reply.rtt_ms);
  return hop;
}

}  // namespace

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::Normal:
      return "normal";
    case StopReason::StopSet:
      return "stop_set";
    case StopReason::Loop:
      return "loop";
    case StopReason::Gap:
      return "gap";
  }
  return "?";
}

std::optional<StopReason> parse_stop_reason(std::string_view s) {
  for (StopReason r : {StopReason::Normal, StopReason::StopSet,
                       StopReason::Loop, StopReason::Gap}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

void PathLengthCdf::add_length(int hops) {
  if (hops < 1) throw std::invalid_argument("path length must be >= 1");
  ++counts_[hops];
  ++responded_;
}

double PathLengthCdf::at(int d) const {
  if (probed() == 0) return 0.0;
  std::size_t within = 0;
  for (const auto& [len, n] : counts_) {
    if (len > d) break;
    within += n;
  }
  return static_cast<double>(within) / static_cast<double>(probed());
}

int PathLengthCdf::max_distance() const {
  return counts_.empty() ? 0 : counts_.rbegin()->first;
}

PathLengthCdf estimate_path_lengths(ProbeService& svc,
                                    std::span<const Address> dests) {
  if (dests.empty()) {
    throw std::invalid_argument("path length estimation needs destinations");
  }
  PathLengthCdf cdf;
  for (Address d : dests) {
    const ProbeReply reply = svc.probe(d, kEstimationTtl);
    if (reply.kind == ReplyKind::DestinationUnreachable &&
        reply.remaining_ttl) {
      cdf.add_length(kEstimationTtl - *reply.remaining_ttl + 1);
    } else {
      cdf.add_silent();
    }
  }
  if (cdf.empty()) {
    throw EmptyCdfError("no destination answered the path length probe");
  }
  return cdf;
}

int choose_h(const PathLengthCdf& cdf, double p) {
  if (cdf.empty()) throw EmptyCdfError("cannot choose h from an empty CDF");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("p must lie in [0, 1]");
  }
  int h = 1;
  for (int d = 1; d <= cdf.max_distance(); ++d) {
    if (cdf.at(d) <= p) h = d;
  }
  return h;
}

// ---------------------------------------------------------------------------

std::optional<StopReason> decide_forward_stop(
    const ProbeReply& reply, PairKey reply_key, const GlobalStopSet& global,
    std::span<const Address> path_so_far, int consecutive_timeouts) {
  if (reply.kind == ReplyKind::DestinationUnreachable) return StopReason::Normal;
  if (reply.responded()) {
    // Our own earlier hop is in the global set too; a repeat is still a loop.
    if (seen_on_path(path_so_far, *reply.responder)) return StopReason::Loop;
    if (global.contains(reply_key)) return StopReason::StopSet;
    return std::nullopt;
  }
  if (consecutive_timeouts >= kGapLimit) return StopReason::Gap;
  return std::nullopt;
}

std::optional<StopReason> decide_backward_stop(
    const ProbeReply& reply, const LocalStopSet& local, int ttl,
    std::span<const Address> path_so_far, int consecutive_timeouts) {
  // With h past the end of the route the destination answers again at
  // smaller TTLs. Neither a loop nor a stop set hit.
  if (reply.kind == ReplyKind::TimeExceeded) {
    if (seen_on_path(path_so_far, *reply.responder)) return StopReason::Loop;
    if (local.contains(*reply.responder)) return StopReason::StopSet;
  } else if (reply.kind == ReplyKind::Timeout &&
             consecutive_timeouts >= kGapLimit) {
    return StopReason::Gap;
  }
  if (ttl <= 1) return StopReason::Normal;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

TraceOutcome probe_destination(Address source, Address dest, int h,
                               LocalStopSet& local, GlobalStopSet& global,
                               ProbeService& svc, double timestamp) {
  if (h < 1) throw ContractViolation("h must be at least 1");

  TraceOutcome out;
  TraceRecord& rec = out.record;
  rec.source = source;
  rec.destination = dest;
  rec.timestamp = timestamp;
  std::vector<Address> path;

  int silent = 0;
  for (int ttl = h;; ++ttl) {
    const ProbeReply reply = svc.probe(dest, ttl);
    ++out.probes;
    rec.hops.push_back(make_hop(ttl, reply));
    std::optional<StopReason> stop;
    if (reply.responded()) {
      silent = 0;
      const PairKey key = global.key_for(*reply.responder, dest);
      stop = decide_forward_stop(reply, key, global, path, silent);
      global.insert(key);
      out.new_pairs.push_back(key);
      path.push_back(*reply.responder);
    } else {
      ++silent;
      stop = decide_forward_stop(reply, {}, global, path, silent);
    }
    if (!stop && ttl >= kMaxTtl) stop = StopReason::Gap;
    if (stop) {
      rec.forward_reason = *stop;
      rec.forward_stop_distance = ttl;
      break;
    }
  }

  rec.backward_reason = StopReason::Normal;
  rec.backward_stop_distance = 0;
  silent = 0;
  for (int ttl = h - 1; ttl >= 1; --ttl) {
    const ProbeReply reply = svc.probe(dest, ttl);
    ++out.probes;
    rec.hops.push_back(make_hop(ttl, reply));
    std::optional<StopReason> stop;
    if (reply.responded()) {
      silent = 0;
      stop = decide_backward_stop(reply, local, ttl, path, silent);
      local.insert(*reply.responder);
      const PairKey key = global.key_for(*reply.responder, dest);
      global.insert(key);
      out.new_pairs.push_back(key);
      path.push_back(*reply.responder);
    } else {
      ++silent;
      stop = decide_backward_stop(reply, local, ttl, path, silent);
    }
    if (stop) {
      rec.backward_reason = *stop;
      rec.backward_stop_distance = ttl;
      break;
    }
  }

  std::sort(rec.hops.begin(), rec.hops.end(),
            [](const Hop& a, const Hop& b) { return a.ttl < b.ttl; });
  return out;
}

}  // namespace dtree
