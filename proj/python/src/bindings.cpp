#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dtree/cli.hpp"
#include "dtree/coordinator.hpp"
#include "dtree/doubletree.hpp"
#include "dtree/errors.hpp"
#include "dtree/metrics.hpp"
#include "dtree/record_io.hpp"
#include "dtree/topology.hpp"
#include "dtree/wire.hpp"

namespace py = pybind11;
using namespace dtree;

namespace {

Address addr(const std::string& s) { return Address::from_string(s); }

std::vector<std::string> addrs(const std::vector<Address>& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (Address a : v) out.push_back(a.to_string());
  return out;
}

py::object json_loads(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

py::bytes as_bytes(const std::vector<std::uint8_t>& b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

const char* kind_name(ReplyKind k) {
  switch (k) {
    case ReplyKind::TimeExceeded: return "time_exceeded";
    case ReplyKind::DestinationUnreachable: return "destination_unreachable";
    case ReplyKind::Timeout: return "timeout";
  }
  return "?";
}

StopSetImpl impl_named(const std::string& s) {
  if (s == "list") return StopSetImpl::List;
  if (s == "bloom") return StopSetImpl::Bloom;
  throw std::invalid_argument("stop_set must be \"list\" or \"bloom\", got \"" + s + "\"");
}

py::dict metrics_dict(const RunMetrics& m) {
  py::dict d;
  d["nodes_discovered"] = m.nodes_discovered;
  d["links_discovered"] = m.links_discovered;
  d["oracle_nodes"] = m.oracle_nodes;
  d["oracle_links"] = m.oracle_links;
  d["node_coverage"] = m.node_coverage;
  d["link_coverage"] = m.link_coverage;
  d["load_reduction"] = m.load_reduction;
  d["load_reduction_with_estimation"] = m.load_reduction_with_estimation;
  d["trace_probes"] = m.trace_probes;
  d["estimation_probes"] = m.estimation_probes;
  d["oracle_probes"] = m.oracle_probes;
  d["non_responding"] = m.non_responding;
  d["invalid_addresses"] = m.invalid_addresses;
  return d;
}

py::dict simulate(const SimTopology& topo, int step_size, double p,
                  const std::string& stop_set, bool compress, int prefix_len,
                  std::uint32_t bloom_bits, int bloom_hashes,
                  const std::vector<std::string>& silent, bool threaded) {
  const auto& mons = topo.monitors();
  std::vector<MonitorConfig> configs;
  for (std::size_t i = 0; i < mons.size(); ++i) {
    MonitorConfig c;
    c.id = mons[i];
    c.next_monitor = mons[(i + 1) % mons.size()];
    c.p = p;
    c.step_size = step_size;
    c.stop_set_impl = impl_named(stop_set);
    c.compress = compress;
    c.prefix_len = prefix_len;
    c.bloom = {bloom_bits, bloom_hashes};
    configs.push_back(c);
  }
  const WindowPlan plan = plan_windows(topo.destinations().size(), mons.size(),
                                       static_cast<std::size_t>(step_size));
  SystemOptions opts;
  if (threaded) opts.scheduler = SchedulerKind::Threaded;
  for (const auto& s : silent) opts.silent_monitors.insert(addr(s));

  RunArtifacts run;
  OracleResult oracle;
  {
    py::gil_scoped_release release;
    run = run_system(topo, configs, plan, topo.destinations(), opts);
    oracle = classic_oracle(topo, mons, topo.destinations());
  }
  const RunMetrics m = compute_metrics(run, oracle);

  py::list records;
  for (const TraceRecord& r : run.records) records.append(json_loads(record_to_json(r)));
  py::list messages;
  for (const SentMessage& s : run.messages) {
    py::dict d;
    d["from"] = s.from.to_string();
    d["to"] = s.to.to_string();
    d["sent_at_s"] = s.sent_at_s;
    d["window"] = s.window;
    d["slice"] = s.slice;
    d["bytes"] = as_bytes(s.bytes);
    messages.append(d);
  }
  std::ostringstream summaries;
  write_summaries(summaries, run.monitors);

  py::dict out;
  out["records"] = records;
  out["messages"] = messages;
  out["monitors"] = json_loads(summaries.str());
  out["all_done"] = run.all_done();
  out["metrics"] = metrics_dict(m);
  out["report"] = report(m, ReportFormat::Table);
  return out;
}

}  // namespace

PYBIND11_MODULE(_doubletree, mod) {
  mod.doc() = "Doubletree topology discovery over a simulated network.";

  py::register_exception<WireError>(mod, "DecodeError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(PyExc_ValueError, e.what());
    } catch (const TopologyError& e) {
      py::set_error(PyExc_ValueError, e.what());
    } catch (const ContractViolation& e) {
      py::set_error(PyExc_ValueError, e.what());
    }
  });

  py::class_<SimTopology>(mod, "Topology")
      .def_static(
          "from_text",
          [](const std::string& text) {
            std::istringstream in(text);
            return read_topology(in);
          },
          py::arg("text"))
      .def("to_text",
           [](const SimTopology& t) {
             std::ostringstream out;
             write_topology(out, t);
             return out.str();
           })
      .def("save", [](const SimTopology& t, const std::filesystem::path& p) {
        save_topology(t, p);
      })
      .def_property_readonly("monitors", [](const SimTopology& t) { return addrs(t.monitors()); })
      .def_property_readonly("destinations",
                             [](const SimTopology& t) { return addrs(t.destinations()); })
      .def_property_readonly("seed", &SimTopology::seed)
      .def(
          "route",
          [](const SimTopology& t, const std::string& m, const std::string& d) {
            return addrs(t.route(addr(m), addr(d)).hops);
          },
          py::arg("monitor"), py::arg("destination"))
      .def(
          "responds", [](const SimTopology& t, const std::string& a) { return t.responds(addr(a)); },
          py::arg("address"))
      .def(
          "probe",
          [](const SimTopology& t, const std::string& m, const std::string& d, int ttl) {
            const ProbeReply r = t.probe(addr(m), addr(d), ttl);
            py::dict out;
            out["kind"] = kind_name(r.kind);
            out["responder"] = r.responder ? py::object(py::str(r.responder->to_string()))
                                           : py::object(py::none());
            out["rtt_ms"] = r.rtt_ms ? py::object(py::float_(*r.rtt_ms)) : py::object(py::none());
            out["remaining_ttl"] =
                r.remaining_ttl ? py::object(py::int_(*r.remaining_ttl)) : py::object(py::none());
            return out;
          },
          py::arg("monitor"), py::arg("destination"), py::arg("ttl"))
      .def("__eq__", [](const SimTopology& a, const SimTopology& b) { return a == b; })
      .def("__repr__", [](const SimTopology& t) {
        return "<Topology " + std::to_string(t.monitors().size()) + " monitors, " +
               std::to_string(t.destinations().size()) + " destinations>";
      });

  mod.def(
      "generate_topology",
      [](int monitors, int destinations, std::uint64_t seed, int routers, int extra_links,
         double nonresponder_fraction, double dest_nonresponder_fraction,
         double private_fraction) {
        GeneratorParams p;
        p.routers = routers;
        p.extra_links = extra_links;
        p.nonresponder_fraction = nonresponder_fraction;
        p.dest_nonresponder_fraction = dest_nonresponder_fraction;
        p.private_fraction = private_fraction;
        return generate_topology(monitors, destinations, p, seed);
      },
      py::arg("monitors"), py::arg("destinations"), py::arg("seed"), py::arg("routers") = 400,
      py::arg("extra_links") = 200, py::arg("nonresponder_fraction") = 0.03,
      py::arg("dest_nonresponder_fraction") = 0.05, py::arg("private_fraction") = 0.0);

  mod.def(
      "load_topology", [](const std::filesystem::path& p) { return load_topology(p); },
      py::arg("path"));

  mod.def(
      "choose_h",
      [](const std::vector<int>& lengths, std::size_t silent, double p) {
        PathLengthCdf cdf;
        for (int l : lengths) cdf.add_length(l);
        for (std::size_t i = 0; i < silent; ++i) cdf.add_silent();
        return choose_h(cdf, p);
      },
      py::arg("lengths"), py::arg("silent") = 0, py::arg("p") = 0.05,
      "h for a window whose answering destinations sit at `lengths` hops.");

  mod.def(
      "encode_message",
      [](std::uint16_t type, const py::bytes& payload) {
        return as_bytes(encode_message(type, from_bytes(payload)));
      },
      py::arg("type"), py::arg("payload") = py::bytes());

  mod.def(
      "encode_stopset",
      [](int window, int slice, const std::vector<std::pair<std::string, std::string>>& pairs,
         bool compress) {
        std::vector<PairKey> keys;
        for (const auto& [i, d] : pairs) keys.push_back({addr(i), addr(d)});
        StopSetPayload p;
        p.window = static_cast<std::uint8_t>(window);
        p.slice = static_cast<std::uint8_t>(slice);
        p.compressed = compress;
        p.stopset = serialize_update(keys);
        if (compress) p.stopset = compress_update(p.stopset);
        return as_bytes(encode_stopset(p));
      },
      py::arg("window"), py::arg("slice"), py::arg("pairs"), py::arg("compress") = false,
      "One list-mode StopSet message. Raises ValueError past 65535 bytes.");

  mod.def(
      "decode_stopset",
      [](const py::bytes& data) {
        const StopSetPayload p = decode_stopset(from_bytes(data));
        py::dict out;
        out["window"] = p.window;
        out["slice"] = p.slice;
        out["kind"] = p.kind == StopSetImpl::List ? "list" : "bloom";
        out["compressed"] = p.compressed;
        std::vector<std::uint8_t> body = p.stopset;
        if (p.compressed) body = decompress_update(body);
        if (p.kind == StopSetImpl::List) {
          py::list pairs;
          for (PairKey k : parse_update(body)) {
            pairs.append(py::make_tuple(k.iface.to_string(), k.dest_key.to_string()));
          }
          out["pairs"] = pairs;
        } else {
          const BloomFilter f = BloomFilter::from_bytes(body);
          out["bloom_bits"] = f.bit_count();
          out["bloom_hashes"] = f.hash_count();
          out["bits_set"] = f.popcount();
        }
        return out;
      },
      py::arg("data"));

  mod.def(
      "classic_oracle",
      [](const SimTopology& t) {
        const OracleResult o = classic_oracle(t, t.monitors(), t.destinations());
        py::dict out;
        out["nodes"] = o.nodes.size();
        out["links"] = o.links.size();
        out["probe_count"] = o.probe_count;
        return out;
      },
      py::arg("topology"), "Hop-by-hop probing from every monitor to every destination.");

  mod.def("simulate", &simulate, py::arg("topology"), py::arg("step_size") = 10,
          py::arg("p") = 0.05, py::arg("stop_set") = "list", py::arg("compress") = false,
          py::arg("prefix_len") = 32, py::arg("bloom_bits") = 10'000'000,
          py::arg("bloom_hashes") = 5, py::arg("silent_monitors") = std::vector<std::string>{},
          py::arg("threaded") = false,
          "Runs the monitor ring under the virtual clock and scores it against the oracle.");

  mod.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the dtree tool in-process; returns (exit code, stdout, stderr).");
}
