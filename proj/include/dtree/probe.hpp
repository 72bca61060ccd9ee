#pragma once

#include <compare>
#include <condition_variable>
#include <cstdint>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "dtree/address.hpp"
#include "dtree/topology.hpp"

namespace dtree {

/// Identifies one outstanding probe of a monitor. Stands in for the unique
/// UDP source port a real prober would use.
struct ProbeToken {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(ProbeToken, ProbeToken) = default;
};

struct ProbeRequest {
  Address dest;
  int ttl = 1;
  ProbeToken token;
};

/// A reply as it comes back from the network: the ICMP payload echoes the
/// probe's destination address and (possibly mangled) source port.
struct EchoedReply {
  ProbeReply reply;
  Address echoed_dest;
  ProbeToken echoed_token;
};

/// The outstanding request whose token and destination both match the echo.
/// Failing that, the single outstanding request to the echoed destination
/// (the quoted ports may have been rewritten on the way back). None when
/// the destination matches nothing or is ambiguous.
[[nodiscard]] std::optional<ProbeRequest> match_reply(
    std::span<const ProbeRequest> outstanding, const EchoedReply& echo);

/// Routes replies to the probes waiting for them. Matching goes through
/// match_reply(), never by arrival order.
class ReplyDispatcher {
 public:
  /// Registers a probe. Throws ContractViolation if the token is in use.
  std::future<ProbeReply> expect(const ProbeRequest& req);
  /// Delivers a reply to its matching probe. Unmatched replies are dropped
  /// and counted; returns whether a probe was resolved.
  bool dispatch(const EchoedReply& echo);
  /// Resolves a still-outstanding probe as Timeout.
  void expire(ProbeToken token);

  [[nodiscard]] std::size_t outstanding() const;
  [[nodiscard]] std::uint64_t discarded() const;
  /// Replies whose echoed token was wrong but whose destination identified
  /// the probe.
  [[nodiscard]] std::uint64_t matched_by_destination() const;

 private:
  struct Pending {
    ProbeRequest request;
    std::promise<ProbeReply> promise;
  };
  mutable std::mutex mutex_;
  std::map<ProbeToken, Pending> pending_;
  std::uint64_t discarded_ = 0;
  std::uint64_t matched_by_dest_ = 0;
};

/// What the Doubletree engine talks to. A raw-socket implementation would
/// derive from this; the simulator is the only backend provided.
class ProbeService {
 public:
  virtual ~ProbeService() = default;

  /// Sends one probe and blocks until its reply or its timeout.
  virtual ProbeReply send_probe(const ProbeRequest& req) = 0;
  /// A token not currently in use by this monitor.
  virtual ProbeToken next_token() = 0;
  [[nodiscard]] virtual std::uint64_t probes_sent() const = 0;
  /// Virtual milliseconds spent waiting on replies so far.
  [[nodiscard]] virtual double elapsed_ms() const = 0;

  ProbeReply probe(Address dest, int ttl) {
    return send_probe({dest, ttl, next_token()});
  }
};

struct SimProbeOptions {
  double timeout_ms = 2000.0;
  int max_outstanding = 64;
  /// Mangle the echoed source port the way some routers do. The echoed
  /// destination is left intact.
  bool corrupt_ports = false;
};

/// Probe service backed by a SimTopology for one monitor. Thread-safe;
/// replies are produced synchronously under a virtual clock.
class SimulatedProbeService final : public ProbeService {
 public:
  SimulatedProbeService(const SimTopology& topo, Address monitor,
                        SimProbeOptions options = {});

  ProbeReply send_probe(const ProbeRequest& req) override;
  ProbeToken next_token() override;
  [[nodiscard]] std::uint64_t probes_sent() const override;
  [[nodiscard]] double elapsed_ms() const override;

  [[nodiscard]] Address monitor() const { return monitor_; }
  [[nodiscard]] const ReplyDispatcher& dispatcher() const {
    return dispatcher_;
  }

 private:
  const SimTopology& topo_;
  Address monitor_;
  SimProbeOptions options_;
  ReplyDispatcher dispatcher_;

  mutable std::mutex mutex_;
  std::condition_variable slot_free_;
  int in_flight_ = 0;
  std::uint32_t next_token_ = 1;
  std::uint64_t sent_ = 0;
  double elapsed_ms_ = 0.0;
};

}  // namespace dtree
