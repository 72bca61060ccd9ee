#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dtree/coordinator.hpp"
#include "dtree/topology.hpp"

namespace dtree {

/// Process exit codes of the dtree tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,   ///< Bad spec or bad command line.
  kExitFailed = 2,   ///< At least one monitor ended Failed.
  kExitDecode = 3,   ///< Malformed wire data.
  kExitIo = 4,
};

struct GeneratorSpec {
  int monitors = 10;
  int destinations = 200;
  GeneratorParams params;
};

/// Everything an experiment needs, read from a JSON spec file. Knob names
/// in "defaults" and per-monitor "overrides": p, step_size, stop_set
/// ("list" | "bloom"), prefix_len, compress, bloom_bits, bloom_hashes,
/// wait_period_s, max_wait_periods, timeout_ms, max_outstanding,
/// corrupt_ports, probe_threads.
struct RunSpec {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> topology;
  std::optional<GeneratorSpec> generate;
  /// Empty means "take the topology's list".
  std::vector<Address> monitors;
  std::vector<Address> destinations;
  MonitorConfig defaults;
  bool step_size_given = false;
  std::map<Address, MonitorConfig> overrides;
  std::set<Address> silent_monitors;
};

/// Relative topology paths are resolved against `base_dir`. Throws
/// ConfigError listing every problem found, one per line.
[[nodiscard]] RunSpec parse_run_spec(const std::string& json_text,
                                     const std::filesystem::path& base_dir);
[[nodiscard]] RunSpec load_run_spec(const std::filesystem::path& path);

/// A spec with its topology loaded or generated and its ring built.
struct Experiment {
  SimTopology topology;
  std::vector<Address> monitors;
  std::vector<Address> destinations;
  std::vector<MonitorConfig> configs;
  WindowPlan plan;
  std::set<Address> silent_monitors;
};

/// Throws ConfigError (all problems, one per line) or TopologyError.
[[nodiscard]] Experiment prepare_experiment(const RunSpec& spec);

/// The spec as it was resolved: explicit lists, topology.txt next to it.
[[nodiscard]] std::string resolved_spec_json(const Experiment& exp);

/// Entry point of the dtree tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace dtree
