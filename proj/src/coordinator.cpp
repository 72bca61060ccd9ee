#include "dtree/coordinator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>
#include <unordered_set>

#include "dtree/errors.hpp"
#include "dtree/wire.hpp"

namespace dtree {

// ---------------------------------------------------------------------------
// Windows

WindowPlan::WindowPlan(std::size_t destinations, std::size_t monitors,
                       std::size_t step_size)
    : destinations_(destinations),
      monitors_(monitors),
      window_size_((destinations + monitors - 1) / monitors),
      step_size_(step_size),
      slices_((window_size_ + step_size - 1) / step_size) {}

WindowPlan::Range WindowPlan::window_range(std::size_t window) const {
  return {window * destinations_ / monitors_,
          (window + 1) * destinations_ / monitors_};
}

WindowPlan::Range WindowPlan::slice_range(std::size_t window,
                                          std::size_t slice) const {
  const auto [begin, end] = window_range(window);
  const std::size_t lo = std::min(begin + slice * step_size_, end);
  const std::size_t hi = std::min(lo + step_size_, end);
  return {lo, hi};
}

std::size_t WindowPlan::window_for(std::size_t monitor,
                                   std::size_t step) const {
  return (monitor + monitors_ - step % monitors_) % monitors_;
}

WindowPlan plan_windows(std::size_t n, std::size_t m, std::size_t step_size) {
  if (m < 1) throw ConfigError("need at least one monitor");
  if (n < m) {
    throw ConfigError("need at least as many destinations (" +
                      std::to_string(n) + ") as monitors (" +
                      std::to_string(m) + ")");
  }
  if (m > 256) throw ConfigError("window numbers are limited to 8 bits");
  const std::size_t w = (n + m - 1) / m;
  if (step_size < 1 || step_size > w) {
    throw ConfigError("step size " + std::to_string(step_size) +
                      " must lie in [1, " + std::to_string(w) + "]");
  }
  WindowPlan plan(n, m, step_size);
  if (plan.slices_per_window() > 256) {
    throw ConfigError("slice numbers are limited to 8 bits");
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Mailbox

void Mailbox::post(Transmission t) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(t));
  }
  changed_.notify_all();
}

void Mailbox::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  changed_.notify_all();
}

Mailbox::Lookup Mailbox::take_locked(std::uint8_t window, std::uint8_t slice,
                                     std::vector<Transmission>& taken) {
  auto it = std::find_if(queue_.begin(), queue_.end(), [&](const auto& t) {
    return t.window == window && t.slice == slice;
  });
  if (it == queue_.end()) return closed_ ? Lookup::Never : Lookup::Pending;
  const auto stop = std::next(it);
  std::move(queue_.begin(), stop, std::back_inserter(taken));
  queue_.erase(queue_.begin(), stop);
  return Lookup::Found;
}

Mailbox::Lookup Mailbox::poll(std::uint8_t window, std::uint8_t slice,
                              std::vector<Transmission>& taken) {
  std::lock_guard lock(mutex_);
  return take_locked(window, slice, taken);
}

Mailbox::Lookup Mailbox::wait(std::uint8_t window, std::uint8_t slice,
                              std::vector<Transmission>& taken) {
  std::unique_lock lock(mutex_);
  Lookup result = Lookup::Pending;
  changed_.wait(lock, [&] {
    result = take_locked(window, slice, taken);
    return result != Lookup::Pending;
  });
  return result;
}

// ---------------------------------------------------------------------------

std::string_view to_string(AgentState s) {
  switch (s) {
    case AgentState::Probing:
      return "probing";
    case AgentState::Waiting:
      return "waiting";
    case AgentState::Done:
      return "done";
    case AgentState::Failed:
      return "failed";
  }
  return "?";
}

bool RunArtifacts::all_done() const {
  return std::all_of(monitors.begin(), monitors.end(), [](const auto& m) {
    return m.final_state == AgentState::Done;
  });
}

// ---------------------------------------------------------------------------
// Agent

MonitorAgent::MonitorAgent(const MonitorConfig& cfg, std::size_t ring_index,
                           const WindowPlan& plan,
                           std::span<const Address> destinations,
                           const SimTopology& topo, Mailbox& inbox,
                           Mailbox& outbox, bool silent, ClockMode clock)
    : cfg_(cfg),
      index_(ring_index),
      plan_(plan),
      destinations_(destinations),
      inbox_(inbox),
      outbox_(outbox),
      silent_(silent),
      clock_(clock),
      svc_(topo, cfg.id, cfg.probe),
      global_(cfg.stop_set_impl, cfg.prefix_len, cfg.bloom) {
  transitions_.push_back({0.0, AgentState::Probing, 0, 0});
}

double MonitorAgent::now_s() const {
  return svc_.elapsed_ms() / 1000.0 + wait_s_;
}

void MonitorAgent::transition(AgentState s, int periods) {
  state_ = s;
  transitions_.push_back({now_s(), s, periods, svc_.probes_sent()});
}

void MonitorAgent::fail(const std::string& why) {
  failure_ = why;
  transition(AgentState::Failed, wait_periods_);
  outbox_.close();
}

MonitorAgent::Step MonitorAgent::step(bool may_block) {
  if (state_ == AgentState::Done || state_ == AgentState::Failed) {
    return Step::Finished;
  }
  try {
    if (step_ > 0) {
      bool blocked = false;
      if (!acquire_update(may_block, blocked)) {
        return blocked ? Step::Blocked : Step::Finished;
      }
    }
    const std::size_t window = plan_.window_for(index_, step_);
    probe_slice(window, slice_);
    if (++slice_ == plan_.slices_per_window()) {
      slice_ = 0;
      ++step_;
    }
    if (step_ == plan_.monitors()) {
      transition(AgentState::Done);
      outbox_.close();
      return Step::Finished;
    }
    return Step::Progressed;
  } catch (const std::exception& e) {
    fail(e.what());
    return Step::Finished;
  }
}

bool MonitorAgent::acquire_update(bool may_block, bool& blocked) {
  const auto window = static_cast<std::uint8_t>(plan_.window_for(index_, step_));
  const auto slice = static_cast<std::uint8_t>(slice_);
  const double period = cfg_.timeouts.wait_period_s;
  const int max_periods = cfg_.timeouts.max_wait_periods;
  std::vector<Transmission> taken;

  auto give_up = [&] {
    fail("no update for window " + std::to_string(window) + " slice " +
         std::to_string(slice) + " after " + std::to_string(max_periods) +
         " waiting periods");
  };

  if (clock_ == ClockMode::Real) {
    for (int periods = 0;; ++periods) {
      if (inbox_.poll(window, slice, taken) == Mailbox::Lookup::Found) {
        for (const Transmission& t : taken) merge(t);
        if (periods > 0) transition(AgentState::Probing, periods);
        return true;
      }
      if (periods == 0) transition(AgentState::Waiting);
      if (periods == max_periods) {
        give_up();
        return false;
      }
      std::this_thread::sleep_for(std::chrono::duration<double>(period));
      wait_s_ += period;
      ++wait_periods_;
    }
  }

  const Mailbox::Lookup found = may_block ? inbox_.wait(window, slice, taken)
                                          : inbox_.poll(window, slice, taken);
  if (found == Mailbox::Lookup::Pending) {
    blocked = true;
    return false;
  }
  // The monitor checks immediately, then once after every sleeping period;
  // an update stamped later than now becomes visible at the first check
  // that follows its send time.
  const double start = now_s();
  int periods = max_periods + 1;
  if (found == Mailbox::Lookup::Found) {
    const double sent = taken.back().sent_at_s;
    if (sent <= start) {
      periods = 0;
    } else {
      periods = static_cast<int>(std::ceil((sent - start) / period));
    }
  }
  if (periods == 0) {
    for (const Transmission& t : taken) merge(t);
    return true;
  }
  transition(AgentState::Waiting);
  if (periods > max_periods) {
    wait_s_ += max_periods * period;
    wait_periods_ += max_periods;
    give_up();
    return false;
  }
  wait_s_ += periods * period;
  wait_periods_ += periods;
  for (const Transmission& t : taken) merge(t);
  transition(AgentState::Probing, periods);
  return true;
}

void MonitorAgent::merge(const Transmission& t) {
  std::vector<std::uint8_t> stream;
  std::optional<bool> compressed;
  for (const auto& frame : t.frames) {
    StopSetPayload p = decode_stopset(frame);
    if (p.kind != global_.impl()) {
      throw WireError("update from " + t.from.to_string() +
                          " uses a different stop set implementation",
                      kHeaderSize + 2);
    }
    if (compressed && *compressed != p.compressed) {
      throw WireError("frames of one update disagree on compression",
                      kHeaderSize + 2);
    }
    compressed = p.compressed;
    stream.insert(stream.end(), p.stopset.begin(), p.stopset.end());
  }
  if (compressed.value_or(false)) stream = decompress_update(stream);
  if (global_.impl() == StopSetImpl::List) {
    global_.merge_update(parse_update(stream));
  } else {
    global_.merge_filter(BloomFilter::from_bytes(stream));
  }
}

void MonitorAgent::probe_slice(std::size_t window, std::size_t slice) {
  if (slice == 0) {
    const auto [wb, we] = plan_.window_range(window);
    const auto dests = destinations_.subspan(wb, we - wb);
    // A window where nothing answers keeps the previous h.
    try {
      h_ = choose_h(estimate_path_lengths(svc_, dests), cfg_.p);
    } catch (const EmptyCdfError&) {
    }
    estimation_probes_ += dests.size();
    h_per_window_.push_back(h_);
  }

  const auto [sb, se] = plan_.slice_range(window, slice);
  std::vector<TraceOutcome> outcomes(se - sb);
  const int threads = std::min<int>(cfg_.probe_threads,
                                    static_cast<int>(outcomes.size()));
  if (threads <= 1) {
    for (std::size_t i = sb; i < se; ++i) {
      outcomes[i - sb] = probe_destination(cfg_.id, destinations_[i], h_,
                                           local_, global_, svc_, now_s());
    }
  } else {
    std::atomic<std::size_t> next{sb};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = next++; i < se; i = next++) {
              outcomes[i - sb] = probe_destination(
                  cfg_.id, destinations_[i], h_, local_, global_, svc_,
                  now_s());
            }
          } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<PairKey> pairs;
  std::unordered_set<PairKey> seen;
  for (TraceOutcome& o : outcomes) {
    trace_probes_ += o.probes;
    for (PairKey k : o.new_pairs) {
      if (seen.insert(k).second) pairs.push_back(k);
    }
    records_.push_back(std::move(o.record));
  }
  send_update(window, slice, pairs);
}

void MonitorAgent::send_update(std::size_t window, std::size_t slice,
                               const std::vector<PairKey>& pairs) {
  std::vector<std::uint8_t> stream;
  if (global_.impl() == StopSetImpl::List) {
    stream = serialize_update(pairs);
  } else {
    BloomFilter delta(cfg_.bloom.bits, cfg_.bloom.hashes);
    for (PairKey k : pairs) delta.insert(k);
    stream = delta.to_bytes();
  }
  if (cfg_.compress) stream = compress_update(stream);

  StopSetPayload header;
  header.window = static_cast<std::uint8_t>(window);
  header.slice = static_cast<std::uint8_t>(slice);
  header.kind = global_.impl();
  header.compressed = cfg_.compress;

  Transmission t;
  t.from = cfg_.id;
  t.sent_at_s = now_s();
  t.window = header.window;
  t.slice = header.slice;
  t.frames = frame_update(header, stream);
  if (silent_) return;
  for (const auto& frame : t.frames) {
    sent_.push_back({cfg_.id, cfg_.next_monitor, t.sent_at_s, t.window,
                     t.slice, frame});
  }
  outbox_.post(std::move(t));
}

MonitorSummary MonitorAgent::summary() const {
  MonitorSummary s;
  s.id = cfg_.id;
  s.final_state = state_;
  s.failure = failure_;
  s.h_per_window = h_per_window_;
  s.estimation_probes = estimation_probes_;
  s.trace_probes = trace_probes_;
  s.finish_s = now_s();
  s.waiting_s = wait_s_;
  s.waiting_periods = wait_periods_;
  s.transitions = transitions_;
  return s;
}

// ---------------------------------------------------------------------------
// System

std::vector<std::string> validate_configs(
    std::span<const MonitorConfig> configs, const WindowPlan& plan) {
  std::vector<std::string> errors;
  if (configs.empty()) {
    errors.emplace_back("no monitors configured");
    return errors;
  }
  if (configs.size() != plan.monitors()) {
    errors.push_back("window plan is for " + std::to_string(plan.monitors()) +
                     " monitors but " + std::to_string(configs.size()) +
                     " are configured");
  }
  std::set<Address> ids;
  const MonitorConfig& first = configs.front();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const MonitorConfig& c = configs[i];
    const std::string who = "monitor " + c.id.to_string() + ": ";
    if (!ids.insert(c.id).second) errors.push_back(who + "duplicate id");
    const Address expected_next = configs[(i + 1) % configs.size()].id;
    if (c.next_monitor != expected_next) {
      errors.push_back(who + "next monitor is " + c.next_monitor.to_string() +
                       " but the ring continues with " +
                       expected_next.to_string());
    }
    if (!(c.p >= 0.0 && c.p <= 1.0)) errors.push_back(who + "p must lie in [0, 1]");
    if (static_cast<std::size_t>(std::max(c.step_size, 0)) != plan.step_size()) {
      errors.push_back(who + "step size " + std::to_string(c.step_size) +
                       " differs from the plan's " +
                       std::to_string(plan.step_size()));
    }
    if (c.stop_set_impl != first.stop_set_impl) {
      errors.push_back(who +
                       "mixed stop set implementations; every monitor must "
                       "use the same one");
    }
    if (c.prefix_len < 0 || c.prefix_len > 32) {
      errors.push_back(who + "prefix length must lie in [0, 32]");
    } else if (c.prefix_len != first.prefix_len) {
      errors.push_back(who + "prefix length differs across monitors");
    }
    if (c.stop_set_impl == StopSetImpl::Bloom) {
      if (c.bloom.bits < 1) errors.push_back(who + "Bloom filter needs bits >= 1");
      if (c.bloom.hashes < 1 || c.bloom.hashes > BloomFilter::kMaxHashes) {
        errors.push_back(who + "Bloom hash count must lie in [1, 5]");
      }
      if (c.bloom.bits != first.bloom.bits ||
          c.bloom.hashes != first.bloom.hashes) {
        errors.push_back(who + "Bloom filter shape differs across monitors");
      }
    }
    if (!(c.timeouts.wait_period_s > 0.0)) {
      errors.push_back(who + "waiting period must be positive");
    }
    if (c.timeouts.max_wait_periods < 0) {
      errors.push_back(who + "max waiting periods must be non-negative");
    }
    if (!(c.probe.timeout_ms > 0.0)) {
      errors.push_back(who + "probe timeout must be positive");
    }
    if (c.probe_threads < 1) errors.push_back(who + "probe_threads must be >= 1");
  }
  return errors;
}

RunArtifacts run_system(const SimTopology& topo,
                        std::span<const MonitorConfig> configs,
                        const WindowPlan& plan,
                        std::span<const Address> destinations,
                        const SystemOptions& options) {
  std::vector<std::string> errors = validate_configs(configs, plan);
  if (destinations.size() != plan.destinations()) {
    errors.push_back("window plan is for " +
                     std::to_string(plan.destinations()) +
                     " destinations but " +
                     std::to_string(destinations.size()) + " were given");
  }
  for (const MonitorConfig& c : configs) {
    for (Address d : destinations) {
      if (topo.find_route(c.id, d) == nullptr) {
        errors.push_back("topology has no route " + c.id.to_string() +
                         " -> " + d.to_string());
        break;
      }
    }
  }
  if (!errors.empty()) {
    std::string msg = errors.front();
    for (std::size_t i = 1; i < errors.size(); ++i) msg += "\n" + errors[i];
    throw ConfigError(msg);
  }

  const std::size_t m = configs.size();
  std::vector<std::unique_ptr<Mailbox>> inboxes;
  for (std::size_t i = 0; i < m; ++i) inboxes.push_back(std::make_unique<Mailbox>());
  std::vector<std::unique_ptr<MonitorAgent>> agents;
  for (std::size_t i = 0; i < m; ++i) {
    agents.push_back(std::make_unique<MonitorAgent>(
        configs[i], i, plan, destinations, topo, *inboxes[i],
        *inboxes[(i + 1) % m], options.silent_monitors.contains(configs[i].id),
        options.clock));
  }

  const bool threaded = options.scheduler == SchedulerKind::Threaded ||
                        options.clock == ClockMode::Real;
  if (threaded) {
    std::vector<std::jthread> threads;
    for (auto& agent : agents) {
      threads.emplace_back([a = agent.get()] {
        while (a->step(true) != MonitorAgent::Step::Finished) {
        }
      });
    }
  } else {
    auto terminal = [](const MonitorAgent& a) {
      return a.state() == AgentState::Done || a.state() == AgentState::Failed;
    };
    for (;;) {
      bool progressed = false;
      for (auto& agent : agents) {
        if (terminal(*agent)) continue;
        if (agent->step(false) != MonitorAgent::Step::Blocked) progressed = true;
      }
      if (std::all_of(agents.begin(), agents.end(),
                      [&](const auto& a) { return terminal(*a); })) {
        break;
      }
      if (!progressed) throw std::logic_error("sequential scheduler stalled");
    }
  }

  RunArtifacts out;
  for (auto& agent : agents) {
    out.records.insert(out.records.end(), agent->records().begin(),
                       agent->records().end());
    out.messages.insert(out.messages.end(), agent->sent().begin(),
                        agent->sent().end());
    out.monitors.push_back(agent->summary());
  }
  return out;
}

}  // namespace dtree
