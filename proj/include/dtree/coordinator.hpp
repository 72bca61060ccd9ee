#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dtree/address.hpp"
#include "dtree/doubletree.hpp"
#include "dtree/probe.hpp"
#include "dtree/stopset.hpp"
#include "dtree/topology.hpp"

namespace dtree {

struct WaitTimeouts {
  double wait_period_s = 30.0;
  int max_wait_periods = 40;
};

struct MonitorConfig {
  Address id;
  Address next_monitor;
  double p = 0.05;
  int step_size = 10;
  StopSetImpl stop_set_impl = StopSetImpl::List;
  BloomParams bloom;
  int prefix_len = 32;
  bool compress = false;
  WaitTimeouts timeouts;
  SimProbeOptions probe;
  /// Destinations of one slice probed concurrently. 1 keeps the run
  /// deterministic.
  int probe_threads = 1;
};

/// Destination windows and their slices. Window k covers a contiguous block
/// of roughly n/m destinations; monitor j works on window (j - t) mod m at
/// step t, so each window reaches a monitor right after its predecessor in
/// the ring has finished it.
class WindowPlan {
 public:
  using Range = std::pair<std::size_t, std::size_t>;  ///< [begin, end)

  WindowPlan() = default;
  WindowPlan(std::size_t destinations, std::size_t monitors,
             std::size_t step_size);

  [[nodiscard]] std::size_t destinations() const { return destinations_; }
  [[nodiscard]] std::size_t monitors() const { return monitors_; }
  [[nodiscard]] std::size_t window_size() const { return window_size_; }
  [[nodiscard]] std::size_t step_size() const { return step_size_; }
  [[nodiscard]] std::size_t windows() const { return monitors_; }
  [[nodiscard]] std::size_t slices_per_window() const { return slices_; }

  [[nodiscard]] Range window_range(std::size_t window) const;
  /// May be empty when the final slice is padded.
  [[nodiscard]] Range slice_range(std::size_t window, std::size_t slice) const;
  [[nodiscard]] std::size_t window_for(std::size_t monitor,
                                       std::size_t step) const;

 private:
  std::size_t destinations_ = 0;
  std::size_t monitors_ = 0;
  std::size_t window_size_ = 0;
  std::size_t step_size_ = 0;
  std::size_t slices_ = 0;
};

/// Throws ConfigError when m < 1, n < m, step size outside [1, w], or more
/// windows/slices than the 8-bit message fields can name.
[[nodiscard]] WindowPlan plan_windows(std::size_t n, std::size_t m,
                                      std::size_t step_size);

/// One StopSet update as handed to the transport: the encoded frames of a
/// slice, stamped with the sender's virtual clock.
struct Transmission {
  Address from;
  double sent_at_s = 0.0;
  std::uint8_t window = 0;
  std::uint8_t slice = 0;
  std::vector<std::vector<std::uint8_t>> frames;
};

/// A monitor's inbox. Only its ring predecessor writes to it.
class Mailbox {
 public:
  enum class Lookup { Found, Pending, Never };

  void post(Transmission t);
  /// The sender will post nothing more.
  void close();

  /// If the (window, slice) update is queued, moves it and everything queued
  /// before it into `taken` (arrival order) and returns Found. Never means
  /// the sender closed without sending it.
  Lookup poll(std::uint8_t window, std::uint8_t slice,
              std::vector<Transmission>& taken);
  /// Like poll() but blocks while the answer would be Pending.
  Lookup wait(std::uint8_t window, std::uint8_t slice,
              std::vector<Transmission>& taken);

 private:
  Lookup take_locked(std::uint8_t window, std::uint8_t slice,
                     std::vector<Transmission>& taken);

  std::mutex mutex_;
  std::condition_variable changed_;
  std::deque<Transmission> queue_;
  bool closed_ = false;
};

enum class AgentState { Probing, Waiting, Done, Failed };
[[nodiscard]] std::string_view to_string(AgentState s);

struct StateTransition {
  double at_s = 0.0;
  AgentState state = AgentState::Probing;
  int waiting_periods = 0;   ///< Periods slept before this transition.
  std::uint64_t probes_sent = 0;
};

struct SentMessage {
  Address from;
  Address to;
  double sent_at_s = 0.0;
  std::uint8_t window = 0;
  std::uint8_t slice = 0;
  std::vector<std::uint8_t> bytes;  ///< One complete frame.
};

struct MonitorSummary {
  Address id;
  AgentState final_state = AgentState::Probing;
  std::string failure;
  std::vector<int> h_per_window;
  std::uint64_t estimation_probes = 0;
  std::uint64_t trace_probes = 0;
  double finish_s = 0.0;
  double waiting_s = 0.0;
  int waiting_periods = 0;
  std::vector<StateTransition> transitions;
};

struct RunArtifacts {
  std::vector<TraceRecord> records;
  std::vector<SentMessage> messages;
  std::vector<MonitorSummary> monitors;

  [[nodiscard]] bool all_done() const;
};

enum class SchedulerKind { Sequential, Threaded };
enum class ClockMode { Virtual, Real };

struct SystemOptions {
  SchedulerKind scheduler = SchedulerKind::Sequential;
  /// Real mode sleeps through waiting periods; it implies threads.
  ClockMode clock = ClockMode::Virtual;
  /// Monitors whose updates are dropped on the floor (fault injection).
  std::set<Address> silent_monitors;
};

/// One monitor of the ring, driven one slice at a time by a scheduler.
class MonitorAgent {
 public:
  enum class Step { Progressed, Blocked, Finished };

  MonitorAgent(const MonitorConfig& cfg, std::size_t ring_index,
               const WindowPlan& plan, std::span<const Address> destinations,
               const SimTopology& topo, Mailbox& inbox, Mailbox& outbox,
               bool silent, ClockMode clock);

  /// Advances by one slice. With `may_block` false a missing predecessor
  /// update yields Blocked instead of waiting on the mailbox.
  Step step(bool may_block);

  [[nodiscard]] AgentState state() const { return state_; }
  [[nodiscard]] const std::vector<TraceRecord>& records() const {
    return records_;
  }
  [[nodiscard]] const std::vector<SentMessage>& sent() const { return sent_; }
  [[nodiscard]] MonitorSummary summary() const;
  [[nodiscard]] const GlobalStopSet& global_stop_set() const { return global_; }
  [[nodiscard]] const LocalStopSet& local_stop_set() const { return local_; }

 private:
  bool acquire_update(bool may_block, bool& blocked);
  void merge(const Transmission& t);
  void probe_slice(std::size_t window, std::size_t slice);
  void send_update(std::size_t window, std::size_t slice,
                   const std::vector<PairKey>& pairs);
  void transition(AgentState s, int periods = 0);
  void fail(const std::string& why);
  [[nodiscard]] double now_s() const;

  MonitorConfig cfg_;
  std::size_t index_;
  const WindowPlan& plan_;
  std::span<const Address> destinations_;
  Mailbox& inbox_;
  Mailbox& outbox_;
  bool silent_;
  ClockMode clock_;

  SimulatedProbeService svc_;
  LocalStopSet local_;
  GlobalStopSet global_;

  AgentState state_ = AgentState::Probing;
  std::size_t step_ = 0;
  std::size_t slice_ = 0;
  int h_ = 1;
  double wait_s_ = 0.0;  ///< Virtual seconds spent waiting so far.
  int wait_periods_ = 0;
  std::string failure_;
  std::vector<int> h_per_window_;
  std::uint64_t estimation_probes_ = 0;
  std::uint64_t trace_probes_ = 0;
  std::vector<TraceRecord> records_;
  std::vector<SentMessage> sent_;
  std::vector<StateTransition> transitions_;
};

/// Runs every monitor to Done or Failed. Throws ConfigError when the
/// configs do not form a ring matching the plan or disagree on the global
/// stop set representation.
[[nodiscard]] RunArtifacts run_system(const SimTopology& topo,
                                      std::span<const MonitorConfig> configs,
                                      const WindowPlan& plan,
                                      std::span<const Address> destinations,
                                      const SystemOptions& options = {});

/// All problems with a set of monitor configs, one message each.
[[nodiscard]] std::vector<std::string> validate_configs(
    std::span<const MonitorConfig> configs, const WindowPlan& plan);

}  // namespace dtree
