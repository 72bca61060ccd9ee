#include "dtree/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dtree/errors.hpp"
#include "dtree/metrics.hpp"
#include "dtree/record_io.hpp"
#include "dtree/wire.hpp"

namespace dtree {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// --- spec parsing ----------------------------------------------------------

class Problems {
 public:
  void add(std::string msg) { list_.push_back(std::move(msg)); }
  [[nodiscard]] bool empty() const { return list_.empty(); }
  [[noreturn]] void raise() const {
    std::string joined;
    for (const auto& p : list_) {
      if (!joined.empty()) joined += '\n';
      joined += p;
    }
    throw ConfigError(joined);
  }
  void raise_if_any() const {
    if (!empty()) raise();
  }

 private:
  std::vector<std::string> list_;
};

template <typename T>
bool read_field(const ordered_json& obj, const char* key, T& out,
                const std::string& where, Problems& problems) {
  const auto it = obj.find(key);
  if (it == obj.end()) return false;
  try {
    out = it->get<T>();
    return true;
  } catch (const nlohmann::json::exception&) {
    problems.add(where + "." + key + ": wrong type (" + it->dump() + ")");
    return false;
  }
}

std::vector<Address> read_addresses(const ordered_json& obj, const char* key,
                                    const std::string& where,
                                    Problems& problems) {
  std::vector<std::string> texts;
  std::vector<Address> out;
  if (!read_field(obj, key, texts, where, problems)) return out;
  for (const auto& t : texts) {
    if (auto a = Address::parse(t)) {
      out.push_back(*a);
    } else {
      problems.add(where + "." + key + ": bad address '" + t + "'");
    }
  }
  return out;
}

const std::set<std::string> kKnobs = {
    "p",           "step_size",        "stop_set",   "prefix_len",
    "compress",    "bloom_bits",       "bloom_hashes", "wait_period_s",
    "max_wait_periods", "timeout_ms",  "max_outstanding", "corrupt_ports",
    "probe_threads"};

void apply_knobs(const ordered_json& obj, MonitorConfig& cfg,
                 const std::string& where, Problems& problems,
                 bool* step_given = nullptr) {
  if (!obj.is_object()) {
    problems.add(where + ": expected an object");
    return;
  }
  for (const auto& [key, value] : obj.items()) {
    if (!kKnobs.contains(key)) problems.add(where + ": unknown key '" + key + "'");
  }
  read_field(obj, "p", cfg.p, where, problems);
  if (read_field(obj, "step_size", cfg.step_size, where, problems) &&
      step_given) {
    *step_given = true;
  }
  std::string impl;
  if (read_field(obj, "stop_set", impl, where, problems)) {
    if (impl == "list") {
      cfg.stop_set_impl = StopSetImpl::List;
    } else if (impl == "bloom") {
      cfg.stop_set_impl = StopSetImpl::Bloom;
    } else {
      problems.add(where + ".stop_set: expected \"list\" or \"bloom\", got \"" +
                   impl + "\"");
    }
  }
  read_field(obj, "prefix_len", cfg.prefix_len, where, problems);
  read_field(obj, "compress", cfg.compress, where, problems);
  read_field(obj, "bloom_bits", cfg.bloom.bits, where, problems);
  read_field(obj, "bloom_hashes", cfg.bloom.hashes, where, problems);
  read_field(obj, "wait_period_s", cfg.timeouts.wait_period_s, where, problems);
  read_field(obj, "max_wait_periods", cfg.timeouts.max_wait_periods, where,
             problems);
  read_field(obj, "timeout_ms", cfg.probe.timeout_ms, where, problems);
  read_field(obj, "max_outstanding", cfg.probe.max_outstanding, where, problems);
  read_field(obj, "corrupt_ports", cfg.probe.corrupt_ports, where, problems);
  read_field(obj, "probe_threads", cfg.probe_threads, where, problems);
}

ordered_json knobs_json(const MonitorConfig& c) {
  return {{"p", c.p},
          {"step_size", c.step_size},
          {"stop_set", c.stop_set_impl == StopSetImpl::Bloom ? "bloom" : "list"},
          {"prefix_len", c.prefix_len},
          {"compress", c.compress},
          {"bloom_bits", c.bloom.bits},
          {"bloom_hashes", c.bloom.hashes},
          {"wait_period_s", c.timeouts.wait_period_s},
          {"max_wait_periods", c.timeouts.max_wait_periods},
          {"timeout_ms", c.probe.timeout_ms},
          {"max_outstanding", c.probe.max_outstanding},
          {"corrupt_ports", c.probe.corrupt_ports},
          {"probe_threads", c.probe_threads}};
}

ordered_json address_list(const std::vector<Address>& v) {
  ordered_json out = ordered_json::array();
  for (Address a : v) out.push_back(a.to_string());
  return out;
}

GeneratorSpec read_generator(const ordered_json& obj, Problems& problems) {
  GeneratorSpec g;
  const std::string where = "generate";
  if (!obj.is_object()) {
    problems.add(where + ": expected an object");
    return g;
  }
  static const std::set<std::string> keys = {
      "monitors",         "destinations",   "routers",
      "extra_links",      "nonresponder_fraction",
      "dest_nonresponder_fraction", "private_fraction", "rtt_min_ms",
      "rtt_max_ms"};
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) problems.add(where + ": unknown key '" + key + "'");
  }
  read_field(obj, "monitors", g.monitors, where, problems);
  read_field(obj, "destinations", g.destinations, where, problems);
  read_field(obj, "routers", g.params.routers, where, problems);
  read_field(obj, "extra_links", g.params.extra_links, where, problems);
  read_field(obj, "nonresponder_fraction", g.params.nonresponder_fraction,
             where, problems);
  read_field(obj, "dest_nonresponder_fraction",
             g.params.dest_nonresponder_fraction, where, problems);
  read_field(obj, "private_fraction", g.params.private_fraction, where,
             problems);
  read_field(obj, "rtt_min_ms", g.params.rtt.min_ms, where, problems);
  read_field(obj, "rtt_max_ms", g.params.rtt.max_ms, where, problems);
  return g;
}

// --- file helpers ----------------------------------------------------------

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error writing " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// --- subcommands -----------------------------------------------------------

int cmd_generate(const fs::path& spec_path, const fs::path& out_path,
                 std::ostream& out) {
  const RunSpec spec = load_run_spec(spec_path);
  Problems problems;
  if (!spec.generate) problems.add("generate: section required");
  if (!spec.seed) problems.add("seed: required for generated topologies");
  problems.raise_if_any();
  const SimTopology topo =
      generate_topology(spec.generate->monitors, spec.generate->destinations,
                        spec.generate->params, *spec.seed);
  std::ostringstream text;
  write_topology(text, topo);
  write_file(out_path, text.str());
  out << "wrote " << out_path.string() << ": " << topo.monitors().size()
      << " monitors, " << topo.destinations().size() << " destinations, "
      << topo.routes().size() << " routes\n";
  return kExitOk;
}

RunMetrics metrics_for(const Experiment& exp, const RunArtifacts& run) {
  const OracleResult oracle =
      classic_oracle(exp.topology, exp.monitors, exp.destinations);
  return compute_metrics(run, oracle);
}

int cmd_run(const fs::path& spec_path, const fs::path& dir, bool sequential,
            bool real_clock, std::ostream& out, std::ostream& err) {
  const Experiment exp = prepare_experiment(load_run_spec(spec_path));
  SystemOptions opts;
  opts.scheduler = sequential ? SchedulerKind::Sequential : SchedulerKind::Threaded;
  opts.clock = real_clock ? ClockMode::Real : ClockMode::Virtual;
  opts.silent_monitors = exp.silent_monitors;
  const RunArtifacts run =
      run_system(exp.topology, exp.configs, exp.plan, exp.destinations, opts);
  const RunMetrics metrics = metrics_for(exp, run);

  make_dir(dir);
  std::ostringstream topo_text, records, messages, monitors;
  write_topology(topo_text, exp.topology);
  write_records(records, run.records);
  write_message_log(messages, run.messages);
  write_summaries(monitors, run.monitors);
  const std::string table = report(metrics, ReportFormat::Table);
  write_file(dir / "topology.txt", topo_text.str());
  write_file(dir / "spec.json", resolved_spec_json(exp));
  write_file(dir / "records.jsonl", records.str());
  write_file(dir / "messages.log", messages.str());
  write_file(dir / "monitors.json", monitors.str());
  write_file(dir / "report.txt", table);
  write_file(dir / "metrics.jsonl", report(metrics, ReportFormat::Lines));
  out << table;

  int failed = 0;
  for (const MonitorSummary& s : run.monitors) {
    if (s.final_state == AgentState::Failed) {
      ++failed;
      err << "error[FAILED]: monitor " << s.id.to_string() << " failed: "
          << s.failure << '\n';
    }
  }
  return failed ? kExitFailed : kExitOk;
}

int cmd_oracle(const fs::path& spec_path, const fs::path& dir,
               std::ostream& out) {
  const Experiment exp = prepare_experiment(load_run_spec(spec_path));
  const OracleResult oracle =
      classic_oracle(exp.topology, exp.monitors, exp.destinations);
  make_dir(dir);
  std::ostringstream traces;
  write_records(traces, oracle.traces);
  ordered_json visits = ordered_json::object(), per_dest = ordered_json::object();
  for (const auto& [a, n] : oracle.per_interface_visits) visits[a.to_string()] = n;
  for (const auto& [a, n] : oracle.per_destination_probes) per_dest[a.to_string()] = n;
  ordered_json links = ordered_json::array();
  for (const Link& l : oracle.links) {
    links.push_back({l.a.to_string(), l.b.to_string()});
  }
  ordered_json nodes = ordered_json::array();
  for (Address a : oracle.nodes) nodes.push_back(a.to_string());
  const ordered_json summary = {{"probe_count", oracle.probe_count},
                                {"nodes", nodes},
                                {"links", links},
                                {"per_interface_visits", visits},
                                {"per_destination_probes", per_dest}};
  write_file(dir / "oracle_traces.jsonl", traces.str());
  write_file(dir / "oracle.json", summary.dump(2) + "\n");
  out << "oracle: " << oracle.nodes.size() << " nodes, " << oracle.links.size()
      << " links, " << oracle.probe_count << " probes\n";
  return kExitOk;
}

int cmd_report(const fs::path& dir, bool lines, std::ostream& out) {
  const Experiment exp = prepare_experiment(load_run_spec(dir / "spec.json"));
  RunArtifacts run;
  {
    std::istringstream in(read_file(dir / "records.jsonl"));
    run.records = read_records(in);
  }
  {
    std::istringstream in(read_file(dir / "messages.log"));
    run.messages = read_message_log(in);
  }
  {
    std::istringstream in(read_file(dir / "monitors.json"));
    run.monitors = read_summaries(in);
  }
  out << report(metrics_for(exp, run),
                lines ? ReportFormat::Lines : ReportFormat::Table);
  return kExitOk;
}

// --- decode ----------------------------------------------------------------

struct Frame {
  std::string label;    ///< "offset N" or "line N", plus sender if known.
  std::size_t offset = 0;
  std::string group;    ///< Frames with equal group form one update.
  std::vector<std::uint8_t> bytes;
};

std::string flag_text(const StopSetPayload& p) {
  std::string s = p.kind == StopSetImpl::Bloom ? "bloom" : "list";
  s += p.ipv6 ? "/IPv6" : "/IPv4";
  s += p.compressed ? "/compressed" : "/raw";
  return s;
}

void print_update(const StopSetPayload& head,
                  const std::vector<std::uint8_t>& stream, std::ostream& out) {
  const std::vector<std::uint8_t> plain =
      head.compressed ? decompress_update(stream) : stream;
  if (head.compressed) {
    out << "  inflated " << stream.size() << " -> " << plain.size()
        << " bytes\n";
  }
  if (head.kind == StopSetImpl::List) {
    const std::vector<PairKey> pairs = parse_update(plain);
    out << "  pairs: " << pairs.size() << '\n';
    for (const PairKey& k : pairs) {
      out << "    " << k.iface.to_string() << " -> " << k.dest_key.to_string()
          << '\n';
    }
  } else {
    const BloomFilter f = BloomFilter::from_bytes(plain);
    out << "  bloom: m=" << f.bit_count() << " k=" << f.hash_count()
        << " set bits=" << f.popcount() << '\n';
  }
}

std::vector<Frame> read_frames(const std::string& data, bool hex) {
  std::vector<Frame> frames;
  if (!hex) {
    const std::span<const std::uint8_t> bytes(
        reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
    for (auto msg : split_messages(bytes)) {
      Frame f;
      f.offset = static_cast<std::size_t>(msg.data() - bytes.data());
      f.label = "offset " + std::to_string(f.offset);
      f.bytes.assign(msg.begin(), msg.end());
      frames.push_back(std::move(f));
    }
    return frames;
  }
  std::istringstream in(data);
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') {
      continue;
    }
    Frame f;
    f.label = "line " + std::to_string(n);
    std::string first;
    std::istringstream(line) >> first;
    if (Address::parse(first)) {
      // A messages.log line.
      std::istringstream one(line);
      std::vector<SentMessage> parsed;
      try {
        parsed = read_message_log(one);
      } catch (const std::exception& e) {
        throw WireError(f.label + ": " + e.what(), 0);
      }
      SentMessage& m = parsed.at(0);
      f.group = m.from.to_string() + "/" + std::to_string(m.window) + "/" +
                std::to_string(m.slice);
      f.label += " " + m.from.to_string() + " -> " + m.to.to_string();
      f.bytes = std::move(m.bytes);
    } else {
      try {
        f.bytes = from_hex(line);
      } catch (const std::invalid_argument& e) {
        throw WireError(f.label + ": " + e.what(), 0);
      }
      f.group = f.label;
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

int cmd_decode(const fs::path& path, bool hex, std::ostream& out) {
  const std::vector<Frame> frames = read_frames(read_file(path), hex);

  // Consecutive frames of one update are listed together, then the update
  // they add up to is decoded once.
  std::optional<StopSetPayload> head;
  std::vector<std::uint8_t> stream;
  std::string group;
  std::string listing;
  auto flush = [&] {
    out << listing;
    if (head) print_update(*head, stream, out);
    head.reset();
    stream.clear();
    listing.clear();
  };
  for (const Frame& f : frames) {
    std::ostringstream line;
    StopSetPayload p;
    try {
      const Message m = decode_message(f.bytes);
      line << f.label << ": length=" << f.bytes.size() << " type=" << m.type;
      if (m.type != static_cast<std::uint16_t>(MessageType::StopSet)) {
        flush();
        out << line.str() << " (unknown, " << m.payload.size()
            << " payload bytes)\n";
        continue;
      }
      line << " (StopSet)";
      if (m.payload.empty()) {
        flush();
        out << line.str() << " empty\n";
        continue;
      }
      p = decode_stopset(f.bytes);
    } catch (const WireError& e) {
      flush();
      throw WireError(f.label + ": " + e.reason(), f.offset + e.offset());
    }
    line << " window=" << int(p.window) << " slice=" << int(p.slice)
         << " flags=" << flag_text(p) << " stopset_bytes=" << p.stopset.size()
         << '\n';
    const std::string key = f.group.empty()
                                ? std::to_string(p.window) + "/" +
                                      std::to_string(p.slice) + "/" + flag_text(p)
                                : f.group;
    if (!head || key != group) {
      flush();
      head = p;
      group = key;
    }
    listing += line.str();
    stream.insert(stream.end(), p.stopset.begin(), p.stopset.end());
  }
  flush();
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

RunSpec parse_run_spec(const std::string& json_text, const fs::path& base_dir) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("spec: invalid JSON: ") + e.what());
  }
  Problems problems;
  RunSpec spec;
  if (!doc.is_object()) {
    problems.add("spec: expected a JSON object");
    problems.raise();
  }
  static const std::set<std::string> keys = {
      "seed", "topology", "generate", "monitors", "destinations",
      "defaults", "overrides", "faults"};
  for (const auto& [key, value] : doc.items()) {
    if (!keys.contains(key)) problems.add("spec: unknown key '" + key + "'");
  }

  std::uint64_t seed = 0;
  if (read_field(doc, "seed", seed, "spec", problems)) spec.seed = seed;
  std::string topo;
  if (read_field(doc, "topology", topo, "spec", problems)) {
    spec.topology = fs::path(topo).is_absolute() ? fs::path(topo) : base_dir / topo;
  }
  if (doc.contains("generate")) spec.generate = read_generator(doc["generate"], problems);
  if (spec.topology && spec.generate) {
    problems.add("spec: give either 'topology' or 'generate', not both");
  }
  if (!spec.topology && !spec.generate) {
    problems.add("spec: one of 'topology' or 'generate' is required");
  }
  if (spec.generate && !spec.seed) {
    problems.add("spec.seed: required for generated topologies");
  }
  spec.monitors = read_addresses(doc, "monitors", "spec", problems);
  spec.destinations = read_addresses(doc, "destinations", "spec", problems);

  if (doc.contains("defaults")) {
    apply_knobs(doc["defaults"], spec.defaults, "defaults", problems,
                &spec.step_size_given);
  }
  if (doc.contains("overrides")) {
    const auto& ov = doc["overrides"];
    if (!ov.is_object()) {
      problems.add("overrides: expected an object keyed by monitor address");
    } else {
      for (const auto& [key, value] : ov.items()) {
        const auto a = Address::parse(key);
        if (!a) {
          problems.add("overrides: bad address '" + key + "'");
          continue;
        }
        // Overrides start from the defaults; the step size is resolved later.
        MonitorConfig cfg = spec.defaults;
        apply_knobs(value, cfg, "overrides." + key, problems);
        spec.overrides[*a] = cfg;
      }
    }
  }
  if (doc.contains("faults")) {
    const auto& faults = doc["faults"];
    if (!faults.is_object()) {
      problems.add("faults: expected an object");
    } else {
      for (const auto& [key, value] : faults.items()) {
        if (key != "silent_monitors") {
          problems.add("faults: unknown key '" + key + "'");
        }
      }
      for (Address a : read_addresses(faults, "silent_monitors", "faults", problems)) {
        spec.silent_monitors.insert(a);
      }
    }
  }
  problems.raise_if_any();
  return spec;
}

RunSpec load_run_spec(const fs::path& path) {
  return parse_run_spec(read_file(path), path.parent_path());
}

Experiment prepare_experiment(const RunSpec& spec) {
  Experiment exp;
  if (spec.topology) {
    if (!fs::exists(*spec.topology)) {
      throw ConfigError("spec.topology: no such file " + spec.topology->string());
    }
    exp.topology = load_topology(*spec.topology);
  } else {
    exp.topology = generate_topology(spec.generate->monitors,
                                     spec.generate->destinations,
                                     spec.generate->params, *spec.seed);
  }
  exp.monitors = spec.monitors.empty() ? exp.topology.monitors() : spec.monitors;
  exp.destinations =
      spec.destinations.empty() ? exp.topology.destinations() : spec.destinations;
  exp.silent_monitors = spec.silent_monitors;

  Problems problems;
  const std::set<Address> monitor_set(exp.monitors.begin(), exp.monitors.end());
  for (const auto& [a, cfg] : spec.overrides) {
    if (!monitor_set.contains(a)) {
      problems.add("overrides." + a.to_string() + ": not a monitor of this run");
    }
  }
  for (Address a : spec.silent_monitors) {
    if (!monitor_set.contains(a)) {
      problems.add("faults.silent_monitors: " + a.to_string() +
                   " is not a monitor of this run");
    }
  }
  const std::size_t m = exp.monitors.size();
  const std::size_t n = exp.destinations.size();
  if (m == 0) problems.add("spec: no monitors");
  if (n < m) {
    problems.add("spec: " + std::to_string(n) + " destinations for " +
                 std::to_string(m) + " monitors; need at least one per monitor");
  }
  problems.raise_if_any();

  // Without an explicit step size, slices default to 10 destinations or the
  // whole window when windows are smaller.
  const std::size_t w = (n + m - 1) / m;
  auto resolve_step = [&](MonitorConfig cfg, bool given) {
    if (!given) cfg.step_size = static_cast<int>(std::min<std::size_t>(10, w));
    return cfg;
  };
  const int step = resolve_step(spec.defaults, spec.step_size_given).step_size;
  if (step < 1 || static_cast<std::size_t>(step) > w) {
    problems.add("defaults.step_size: " + std::to_string(step) +
                 " outside [1, " + std::to_string(w) + "]");
    problems.raise();
  }
  try {
    exp.plan = plan_windows(n, m, static_cast<std::size_t>(step));
  } catch (const ConfigError& e) {
    problems.add(e.what());
    problems.raise();
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto it = spec.overrides.find(exp.monitors[i]);
    MonitorConfig cfg = it == spec.overrides.end()
                            ? resolve_step(spec.defaults, spec.step_size_given)
                            : it->second;
    if (it != spec.overrides.end() && !spec.step_size_given &&
        cfg.step_size == spec.defaults.step_size) {
      cfg.step_size = step;
    }
    cfg.id = exp.monitors[i];
    cfg.next_monitor = exp.monitors[(i + 1) % m];
    exp.configs.push_back(cfg);
  }
  for (const std::string& e : validate_configs(exp.configs, exp.plan)) {
    problems.add(e);
  }
  for (Address mon : exp.monitors) {
    for (Address d : exp.destinations) {
      if (!exp.topology.find_route(mon, d)) {
        problems.add("topology: no route from " + mon.to_string() + " to " +
                     d.to_string());
      }
    }
  }
  problems.raise_if_any();
  return exp;
}

std::string resolved_spec_json(const Experiment& exp) {
  ordered_json doc;
  doc["seed"] = exp.topology.seed();
  doc["topology"] = "topology.txt";
  doc["monitors"] = address_list(exp.monitors);
  doc["destinations"] = address_list(exp.destinations);
  const ordered_json defaults =
      exp.configs.empty() ? knobs_json(MonitorConfig{}) : knobs_json(exp.configs[0]);
  doc["defaults"] = defaults;
  ordered_json overrides = ordered_json::object();
  for (const MonitorConfig& c : exp.configs) {
    const ordered_json k = knobs_json(c);
    if (k != defaults) overrides[c.id.to_string()] = k;
  }
  if (!overrides.empty()) doc["overrides"] = overrides;
  if (!exp.silent_monitors.empty()) {
    doc["faults"] = {{"silent_monitors",
                      address_list({exp.silent_monitors.begin(),
                                    exp.silent_monitors.end()})}};
  }
  return doc.dump(2) + "\n";
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Cooperative traceroute (Doubletree) simulator"};
  app.require_subcommand(1);

  fs::path spec_path, out_path, run_dir, decode_path;
  bool sequential = false, real_clock = false, lines = false, hex = false;

  auto* gen = app.add_subcommand("generate", "Generate a topology file");
  gen->add_option("spec", spec_path, "Spec file with a 'generate' section")->required();
  gen->add_option("-o,--out", out_path, "Topology file to write")->required();

  auto* run = app.add_subcommand("run", "Run a Doubletree experiment");
  run->add_option("spec", spec_path, "Spec file")->required();
  run->add_option("-o,--out", out_path, "Output directory")->required();
  run->add_flag("--sequential", sequential, "Use the single-threaded scheduler");
  run->add_flag("--real-clock", real_clock, "Sleep through waiting periods");

  auto* orc = app.add_subcommand("oracle", "Run classic probing only");
  orc->add_option("spec", spec_path, "Spec file")->required();
  orc->add_option("-o,--out", out_path, "Output directory")->required();

  auto* rep = app.add_subcommand("report", "Render the report of a run directory");
  rep->add_option("dir", run_dir, "Run directory")->required();
  rep->add_flag("--lines", lines, "JSON lines instead of tables");

  auto* dec = app.add_subcommand("decode", "Dump StopSet messages");
  dec->add_option("file", decode_path, "Binary capture, or hex text with --hex")
      ->required();
  dec->add_flag("--hex", hex, "Input is hex text or a messages.log");

  std::vector<const char*> argv{"dtree"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error[USAGE]: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_generate(spec_path, out_path, out);
    if (run->parsed()) {
      return cmd_run(spec_path, out_path, sequential, real_clock, out, err);
    }
    if (orc->parsed()) return cmd_oracle(spec_path, out_path, out);
    if (rep->parsed()) return cmd_report(run_dir, lines, out);
    if (dec->parsed()) return cmd_decode(decode_path, hex, out);
  } catch (const ConfigError& e) {
    std::istringstream lines_in(e.what());
    std::string line;
    while (std::getline(lines_in, line)) err << "error[CONFIG]: " << line << '\n';
    return kExitConfig;
  } catch (const TopologyError& e) {
    err << "error[TOPOLOGY]: " << e.what() << '\n';
    return kExitConfig;
  } catch (const WireError& e) {
    err << "error[DECODE]: " << e.what() << '\n';
    return kExitDecode;
  } catch (const std::invalid_argument& e) {
    err << "error[CONFIG]: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error[IO]: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error[IO]: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitConfig;
}

}  // namespace dtree
