#include "dtree/probe.hpp"

#include "dtree/errors.hpp"

namespace dtree {

std::optional<ProbeRequest> match_reply(
    std::span<const ProbeRequest> outstanding, const EchoedReply& echo) {
  const ProbeRequest* by_dest = nullptr;
  int dest_matches = 0;
  for (const ProbeRequest& req : outstanding) {
    if (req.dest != echo.echoed_dest) continue;
    if (req.token == echo.echoed_token) return req;
    by_dest = &req;
    ++dest_matches;
  }
  // Some routers rewrite the ports quoted in the ICMP payload. The echoed
  // destination still identifies the probe as long as it is unambiguous.
  if (dest_matches == 1) return *by_dest;
  return std::nullopt;
}

std::future<ProbeReply> ReplyDispatcher::expect(const ProbeRequest& req) {
  std::lock_guard lock(mutex_);
  if (pending_.contains(req.token)) {
    throw ContractViolation("probe token " + std::to_string(req.token.value) +
                            " is already outstanding");
  }
  auto& slot = pending_[req.token];
  slot.request = req;
  return slot.promise.get_future();
}

bool ReplyDispatcher::dispatch(const EchoedReply& echo) {
  std::lock_guard lock(mutex_);
  std::vector<ProbeRequest> outstanding;
  outstanding.reserve(pending_.size());
  for (const auto& [token, p] : pending_) outstanding.push_back(p.request);
  const auto match = match_reply(outstanding, echo);
  if (!match) {
    ++discarded_;
    return false;
  }
  if (match->token != echo.echoed_token) ++matched_by_dest_;
  auto it = pending_.find(match->token);
  it->second.promise.set_value(echo.reply);
  pending_.erase(it);
  return true;
}

void ReplyDispatcher::expire(ProbeToken token) {
  std::lock_guard lock(mutex_);
  auto it = pending_.find(token);
  if (it == pending_.end()) return;
  it->second.promise.set_value(ProbeReply::timeout());
  pending_.erase(it);
}

std::size_t ReplyDispatcher::outstanding() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

std::uint64_t ReplyDispatcher::matched_by_destination() const {
  std::lock_guard lock(mutex_);
  return matched_by_dest_;
}

std::uint64_t ReplyDispatcher::discarded() const {
  std::lock_guard lock(mutex_);
  return discarded_;
}

SimulatedProbeService::SimulatedProbeService(const SimTopology& topo,
                                             Address monitor,
                                             SimProbeOptions options)
    : topo_(topo), monitor_(monitor), options_(options) {
  if (options_.max_outstanding < 1) options_.max_outstanding = 1;
}

ProbeToken SimulatedProbeService::next_token() {
  std::lock_guard lock(mutex_);
  const ProbeToken t{next_token_++};
  if (next_token_ == 0) next_token_ = 1;
  return t;
}

ProbeReply SimulatedProbeService::send_probe(const ProbeRequest& req) {
  if (req.ttl < 1) throw ContractViolation("probe TTL must be at least 1");
  // Unknown pairs are a caller bug; surface them before taking a slot.
  (void)topo_.route(monitor_, req.dest);

  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock,
                    [&] { return in_flight_ < options_.max_outstanding; });
    ++in_flight_;
  }
  struct SlotRelease {
    SimulatedProbeService* self;
    ~SlotRelease() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_free_.notify_one();
    }
  } release{this};

  std::future<ProbeReply> pending = dispatcher_.expect(req);

  EchoedReply echo{topo_.probe(monitor_, req.dest, req.ttl), req.dest,
                   req.token};
  if (options_.corrupt_ports) {
    echo.echoed_token = ProbeToken{req.token.value + 1};
  }
  if (echo.reply.responded()) dispatcher_.dispatch(echo);
  dispatcher_.expire(req.token);

  ProbeReply reply = pending.get();
  std::lock_guard lock(mutex_);
  ++sent_;
  elapsed_ms_ += reply.rtt_ms.value_or(options_.timeout_ms);
  return reply;
}

std::uint64_t SimulatedProbeService::probes_sent() const {
  std::lock_guard lock(mutex_);
  return sent_;
}

double SimulatedProbeService::elapsed_ms() const {
  std::lock_guard lock(mutex_);
  return elapsed_ms_;
}

}  // namespace dtree
