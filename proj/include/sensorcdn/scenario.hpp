#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sensorcdn/cache.hpp"
#include "sensorcdn/delivery.hpp"
#include "sensorcdn/engine.hpp"
#include "sensorcdn/metrics.hpp"
#include "sensorcdn/sensordata.hpp"
#include "sensorcdn/topology.hpp"

namespace sensorcdn {

struct SensorParams {
  std::size_t count = 1000;
  double updates_per_minute = 4;
  Seconds duration = 360;
  std::uint32_t entry_bytes = kDefaultEntryBytes;
};

struct QueryTemplate {
  Seconds window = 360;
  /// Window end; defaults to the end of the reading period.
  std::optional<Seconds> end;
  SensorFilter sensors;
  std::string type_tag = "sensor";
};

struct ScheduleParams {
  /// Empty: round-robin across edge nodes.
  std::vector<NodeId> clients;
  /// Zero: one request per client.
  std::size_t requests = 0;
  Seconds spacing = 0;
  /// Defaults to the query window end.
  std::optional<Seconds> start;
  Concurrency concurrency = Concurrency::sequential;
};

struct ScenarioConfig {
  std::string topology_path;
  /// Takes precedence over topology_path when set.
  std::optional<Topology> topology;
  DeploymentMode mode = DeploymentMode::edge_only;
  std::uint64_t seed = 1;
  SensorParams sensors;
  /// Line-delimited reading dump to replay instead of generating.
  std::string readings_path;
  QueryTemplate query;
  ScheduleParams schedule;
  ModelParams model;
  std::map<NodeId, BitsPerSecond> serve_rate;
  std::vector<std::size_t> remove_before_requests;
  std::string output_dir = "out";
  bool trace = false;
  bool keep_packages = false;

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0)) throw ConfigError(std::string(what) + " must be positive");
    };
    positive(sensors.updates_per_minute, "sensors.rate_per_minute");
    positive(sensors.entry_bytes, "sensors.entry_bytes");
    if (!(sensors.duration >= 0)) throw ConfigError("sensors.duration must be non-negative");
    positive(query.window, "query.window");
    if (!(schedule.spacing >= 0)) throw ConfigError("schedule.spacing must be non-negative");
    positive(model.goodput, "model.goodput");
    if (model.goodput > 1) throw ConfigError("model.goodput must not exceed 1");
    if (!(model.package.k_create >= 0)) throw ConfigError("model.k_create must be non-negative");
    if (!(model.handshake.latency >= 0)) throw ConfigError("model.signaling_latency must be non-negative");
    positive(static_cast<double>(model.handshake.message_bytes), "model.signaling_message_bytes");
    if (!(model.processing >= 0)) throw ConfigError("model.processing must be non-negative");
    positive(model.handshake.ttl, "model.ttl");
    for (const auto& [n, r] : serve_rate) positive(r, "model.serve_rate");
  }
};

// Config file -----------------------------------------------------------------

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                           const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) == known.end())
      throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

}  // namespace detail

/// Parses the JSON scenario file; relative paths resolve against base_dir.
inline ScenarioConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::reject_unknown;
  ScenarioConfig c;
  try {
    reject_unknown(j, {"name", "topology", "mode", "seed", "sensors", "readings", "query", "schedule", "model",
                       "remove_before_requests", "output_dir", "trace", "keep_packages"},
                   "config");
    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return (path.is_relative() && !base_dir.empty() ? base_dir / path : path).lexically_normal().string();
    };
    c.topology_path = resolve(j.at("topology").get<std::string>());
    if (j.contains("mode")) {
      auto m = parse_mode(j["mode"].get<std::string>());
      if (!m) throw ConfigError("unknown mode '" + j["mode"].get<std::string>() + "'");
      c.mode = *m;
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("readings")) c.readings_path = resolve(j["readings"].get<std::string>());
    if (j.contains("sensors")) {
      const auto& s = j["sensors"];
      reject_unknown(s, {"count", "rate_per_minute", "duration", "entry_bytes"}, "sensors");
      c.sensors.count = s.value("count", c.sensors.count);
      c.sensors.updates_per_minute = s.value("rate_per_minute", c.sensors.updates_per_minute);
      c.sensors.duration = s.value("duration", c.sensors.duration);
      c.sensors.entry_bytes = s.value("entry_bytes", c.sensors.entry_bytes);
    }
    if (j.contains("query")) {
      const auto& q = j["query"];
      reject_unknown(q, {"window", "end", "sensors", "type"}, "query");
      c.query.window = q.value("window", c.query.window);
      if (q.contains("end")) c.query.end = q["end"].get<double>();
      if (q.contains("sensors") && !q["sensors"].is_string()) {
        c.query.sensors = q["sensors"].get<std::vector<SensorId>>();
      } else if (q.contains("sensors") && q["sensors"].get<std::string>() != "all") {
        throw ConfigError("query.sensors must be \"all\" or an id list");
      }
      c.query.type_tag = q.value("type", c.query.type_tag);
    }
    if (j.contains("schedule")) {
      const auto& s = j["schedule"];
      reject_unknown(s, {"clients", "requests", "spacing", "start", "concurrency"}, "schedule");
      if (s.contains("clients") && !s["clients"].is_string()) {
        c.schedule.clients = s["clients"].get<std::vector<NodeId>>();
      } else if (s.contains("clients") && s["clients"].get<std::string>() != "round_robin") {
        throw ConfigError("schedule.clients must be \"round_robin\" or an id list");
      }
      c.schedule.requests = s.value("requests", c.schedule.requests);
      c.schedule.spacing = s.value("spacing", c.schedule.spacing);
      if (s.contains("start")) c.schedule.start = s["start"].get<double>();
      if (s.contains("concurrency")) {
        const auto v = s["concurrency"].get<std::string>();
        if (v == "sequential") c.schedule.concurrency = Concurrency::sequential;
        else if (v == "equal_share") c.schedule.concurrency = Concurrency::equal_share;
        else throw ConfigError("unknown concurrency '" + v + "'");
      }
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      reject_unknown(m, {"k_create", "envelope_bytes", "goodput", "signaling_latency", "signaling_message_bytes",
                         "processing", "ttl", "bundle_bytes", "resignal_warm_paths", "forwarding", "serve_rate"},
                     "model");
      auto& p = c.model;
      p.package.k_create = m.value("k_create", p.package.k_create);
      p.package.envelope_bytes = m.value("envelope_bytes", p.package.envelope_bytes);
      p.goodput = m.value("goodput", p.goodput);
      p.handshake.latency = m.value("signaling_latency", p.handshake.latency);
      p.handshake.message_bytes = m.value("signaling_message_bytes", p.handshake.message_bytes);
      p.processing = m.value("processing", p.processing);
      p.handshake.ttl = m.value("ttl", p.handshake.ttl);
      p.handshake.bundle_bytes = m.value("bundle_bytes", p.handshake.bundle_bytes);
      p.resignal_warm_paths = m.value("resignal_warm_paths", p.resignal_warm_paths);
      if (m.contains("forwarding")) {
        const auto v = m["forwarding"].get<std::string>();
        if (v == "pipelined") p.forwarding = Forwarding::pipelined;
        else if (v == "store_and_forward") p.forwarding = Forwarding::store_and_forward;
        else throw ConfigError("unknown forwarding '" + v + "'");
      }
      if (m.contains("serve_rate")) {
        for (const auto& [k, v] : m["serve_rate"].items())
          c.serve_rate[static_cast<NodeId>(std::stoul(k))] = v.get<double>();
      }
    }
    if (j.contains("remove_before_requests"))
      c.remove_before_requests = j["remove_before_requests"].get<std::vector<std::size_t>>();
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
    c.trace = j.value("trace", c.trace);
    c.keep_packages = j.value("keep_packages", c.keep_packages);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ScenarioConfig load_config(const std::filesystem::path& file) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  try {
    return parse_config(j, file.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

inline Topology load_topology_file(const std::filesystem::path& file) {
  try {
    return load_topology(read_file(file));
  } catch (const TopologyError& e) {
    throw TopologyError(file.string() + ": " + e.what());
  }
}

/// Effective configuration, defaults filled in, in a stable key order.
inline ordered_json to_json(const ScenarioConfig& c) {
  ordered_json j;
  j["topology"] = c.topology_path;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["sensors"] = {{"count", c.sensors.count},
                  {"rate_per_minute", c.sensors.updates_per_minute},
                  {"duration", c.sensors.duration},
                  {"entry_bytes", c.sensors.entry_bytes}};
  if (!c.readings_path.empty()) j["readings"] = c.readings_path;
  ordered_json q;
  q["window"] = c.query.window;
  if (c.query.end) q["end"] = *c.query.end;
  q["sensors"] = c.query.sensors ? ordered_json(*c.query.sensors) : ordered_json("all");
  q["type"] = c.query.type_tag;
  j["query"] = q;
  ordered_json s;
  s["clients"] = c.schedule.clients.empty() ? ordered_json("round_robin") : ordered_json(c.schedule.clients);
  s["requests"] = c.schedule.requests;
  s["spacing"] = c.schedule.spacing;
  if (c.schedule.start) s["start"] = *c.schedule.start;
  s["concurrency"] = to_string(c.schedule.concurrency);
  j["schedule"] = s;
  ordered_json m;
  m["k_create"] = c.model.package.k_create;
  m["envelope_bytes"] = c.model.package.envelope_bytes;
  m["goodput"] = c.model.goodput;
  m["signaling_latency"] = c.model.handshake.latency;
  m["signaling_message_bytes"] = c.model.handshake.message_bytes;
  m["processing"] = c.model.processing;
  m["ttl"] = c.model.handshake.ttl;
  m["bundle_bytes"] = c.model.handshake.bundle_bytes;
  m["resignal_warm_paths"] = c.model.resignal_warm_paths;
  m["forwarding"] = to_string(c.model.forwarding);
  ordered_json sr = ordered_json::object();
  for (const auto& [n, r] : c.serve_rate) sr[std::to_string(n)] = r;
  m["serve_rate"] = sr;
  j["model"] = m;
  j["remove_before_requests"] = c.remove_before_requests;
  return j;
}

// Scenario --------------------------------------------------------------------

/// Clients interleaved across their edge nodes: the first client of every
/// edge (edges by id, clients by id), then the second, and so on.
inline std::vector<NodeId> round_robin_clients(const Topology& t) {
  std::map<NodeId, std::vector<NodeId>> by_edge;
  for (NodeId c : t.nodes_of_kind(NodeKind::end)) by_edge[t.neighbors(c).front()].push_back(c);
  std::vector<NodeId> out;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (const auto& [edge, clients] : by_edge) {
      if (round < clients.size()) {
        out.push_back(clients[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

inline Topology resolve_topology(const ScenarioConfig& cfg) {
  Topology base = cfg.topology ? *cfg.topology : load_topology_file(cfg.topology_path);
  if (cfg.serve_rate.empty()) return base;
  auto nodes = base.nodes();
  for (const auto& [id, rate] : cfg.serve_rate) {
    auto it = std::find_if(nodes.begin(), nodes.end(), [id = id](const NodeSpec& n) { return n.id == id; });
    if (it == nodes.end()) throw ConfigError("serve_rate override for unknown node " + std::to_string(id));
    it->serve_rate = rate;
  }
  return Topology::build(std::move(nodes), base.links());
}

inline Query make_query(const ScenarioConfig& cfg) {
  const Seconds end = cfg.query.end.value_or(cfg.sensors.duration);
  Query q{cfg.query.sensors, end - cfg.query.window, end, cfg.query.type_tag};
  if (q.sensors) {
    std::sort(q.sensors->begin(), q.sensors->end());
    q.sensors->erase(std::unique(q.sensors->begin(), q.sensors->end()), q.sensors->end());
  }
  q.validate();
  return q;
}

/// Generates (or replays) readings, feeds the gateway, and runs the client
/// request schedule. Identical (config, seed) yield identical reports.
inline RunReport run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const Topology topo = resolve_topology(cfg);
  const SamplingGrid grid =
      make_grid(cfg.sensors.count, cfg.sensors.updates_per_minute, cfg.sensors.duration, cfg.seed);
  std::vector<SensorReading> readings;
  if (cfg.readings_path.empty()) {
    readings = generate_readings(grid, cfg.seed, cfg.sensors.entry_bytes);
  } else {
    std::ifstream in(cfg.readings_path);
    if (!in) throw ConfigError("cannot open reading dump " + cfg.readings_path);
    readings = restore_readings(in);
  }

  std::vector<NodeId> clients = cfg.schedule.clients.empty() ? round_robin_clients(topo) : cfg.schedule.clients;
  for (NodeId c : clients) {
    if (!topo.contains(c) || topo.node(c).kind != NodeKind::end)
      throw ConfigError("schedule client " + std::to_string(c) + " is not an end node");
  }
  if (clients.empty()) throw ConfigError("scenario has no clients");
  const std::size_t n_requests = cfg.schedule.requests ? cfg.schedule.requests : clients.size();
  const Query query = make_query(cfg);
  const Seconds start = cfg.schedule.start.value_or(query.t_end);
  const std::set<std::size_t> removals(cfg.remove_before_requests.begin(), cfg.remove_before_requests.end());

  EventEngine engine;
  ReadingStore store;
  DeliveryState state(topo, grid, store, cfg.model);
  state.keep_packages = cfg.keep_packages;
  state.concurrency = cfg.schedule.concurrency;

  for (const auto& r : readings) {
    engine.schedule(r.timestamp, [&store, &r] { store.ingest(r); });
  }

  RunReport report;
  report.config = to_json(cfg);
  report.outcomes.resize(n_requests);

  std::function<void(std::size_t)> issue = [&](std::size_t i) {
    const Seconds now = engine.now();
    store.advance_to(now);
    std::vector<LinkFlow> removal_flows;
    if (removals.count(i)) removal_flows = remove_all(state, now);
    auto plan = std::make_shared<RequestPlan>(
        plan_request(state, clients[i % clients.size()], query, cfg.mode, now, i));
    if (!removal_flows.empty() || removals.count(i)) {
      plan->outcome.preceded_by_remove = true;
      auto flows = plan->outcome.flows;
      flows.insert(flows.end(), removal_flows.begin(), removal_flows.end());
      plan->outcome.flows = aggregate(flows);
    }
    const Seconds end = plan->outcome.end();
    if (state.concurrency == Concurrency::equal_share) state.in_flight.emplace_back(end, plan->links);
    engine.schedule(end, [&, plan, i] {
      apply_fills(state, *plan, engine.now());
      report.outcomes[i] = std::move(plan->outcome);
      if (cfg.schedule.concurrency == Concurrency::sequential && i + 1 < n_requests) {
        const Seconds next = std::max(start + static_cast<double>(i + 1) * cfg.schedule.spacing, engine.now());
        engine.schedule(next, [&, i] { issue(i + 1); });
      }
    });
  };

  if (cfg.schedule.concurrency == Concurrency::sequential) {
    engine.schedule(start, [&] { issue(0); });
  } else {
    for (std::size_t i = 0; i < n_requests; ++i)
      engine.schedule(start + static_cast<double>(i) * cfg.schedule.spacing, [&, i] { issue(i); });
  }
  engine.run();

  for (const auto& o : report.outcomes) record_flows(report.links, topo, o.flows);
  const Seconds period = 60.0 / cfg.sensors.updates_per_minute;
  report.caches = snapshot(state.caches, period, engine.now());
  report.warnings = state.caches.warnings();
  report.trace = std::move(state.trace);
  return report;
}

// Comparison ------------------------------------------------------------------

struct RunComparison {
  std::vector<std::string> labels;
  /// reduction[i][j] = 1 - http(j) / http(i).
  std::vector<std::vector<double>> reduction;
  /// saving[i][j] = http(i) - http(j), byte-hops.
  std::vector<std::vector<double>> saving;
  ordered_json summary;
};

/// Side-by-side curves, pairwise HTTP reductions and mean decompositions.
inline RunComparison compare_runs(const std::vector<RunReport>& reports,
                                  std::vector<std::string> labels = {}) {
  if (reports.empty()) throw Error("nothing to compare");
  for (std::size_t i = 1; i < reports.size(); ++i) require_same_shape(reports[0], reports[i]);
  for (std::size_t i = labels.size(); i < reports.size(); ++i) {
    labels.push_back(reports[i].outcomes.empty() ? "run" + std::to_string(i)
                                                 : std::string(to_string(reports[i].outcomes.front().mode)));
  }
  RunComparison c;
  c.labels = labels;
  const std::size_t n = reports[0].outcomes.size();
  std::vector<double> http;
  for (const auto& r : reports) http.push_back(static_cast<double>(cumulative_traffic(r, n, TrafficClass::http)));
  c.reduction.assign(reports.size(), std::vector<double>(reports.size(), 0));
  c.saving.assign(reports.size(), std::vector<double>(reports.size(), 0));
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t j = 0; j < reports.size(); ++j) {
      c.reduction[i][j] = http[i] == 0 ? 0 : 1.0 - http[j] / http[i];
      c.saving[i][j] = http[i] - http[j];
    }
  }

  ordered_json runs = ordered_json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    ordered_json r;
    r["label"] = labels[i];
    r["requests"] = n;
    r["http_byte_hops"] = cumulative_traffic(reports[i], n, TrafficClass::http);
    r["signaling_byte_hops"] = cumulative_traffic(reports[i], n, TrafficClass::signaling);
    r["mean_decomposition"] = n ? to_json(average_decomposition(reports[i])) : ordered_json();
    runs.push_back(std::move(r));
  }
  ordered_json pairs = ordered_json::array();
  for (std::size_t i = 0; i < reports.size(); ++i)
    for (std::size_t j = i + 1; j < reports.size(); ++j)
      pairs.push_back({{"baseline", labels[i]},
                       {"run", labels[j]},
                       {"http_reduction", c.reduction[i][j]},
                       {"http_saving_byte_hops", c.saving[i][j]}});
  ordered_json curves = ordered_json::array();
  for (std::size_t k = 0; k <= n; ++k) {
    ordered_json row;
    row["requests"] = k;
    for (std::size_t i = 0; i < reports.size(); ++i)
      row[labels[i]] = cumulative_traffic(reports[i], k, TrafficClass::http);
    curves.push_back(std::move(row));
  }
  c.summary["runs"] = std::move(runs);
  c.summary["comparisons"] = std::move(pairs);
  c.summary["http_curves"] = std::move(curves);
  return c;
}

// Output files ----------------------------------------------------------------

inline std::string report_text(const RunReport& r) { return to_json(r).dump(2) + "\n"; }

/// Writes report.json, downloads.csv, traffic.csv and, on request, trace.csv.
inline void write_outputs(const RunReport& r, const std::filesystem::path& dir, bool with_trace) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("report.json");
    f << report_text(r);
  }
  {
    auto f = open("downloads.csv");
    write_downloads_csv(f, r);
  }
  {
    auto f = open("traffic.csv");
    write_traffic_csv(f, r);
  }
  if (with_trace) {
    auto f = open("trace.csv");
    write_trace_csv(f, r.trace);
  }
}

}  // namespace sensorcdn
