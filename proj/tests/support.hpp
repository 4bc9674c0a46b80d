#pragma once
// Oracles and fixtures shared by the unit suites and the acceptance binary.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sensorcdn/sensorcdn.hpp"

namespace sensorcdn::testing {

inline std::filesystem::path source_dir() { return SENSORCDN_SOURCE_DIR; }
inline std::filesystem::path preset(const std::string& name) { return source_dir() / "configs" / (name + ".json"); }
inline Topology ref60() { return load_topology_file(source_dir() / "data" / "ref60.topo"); }

/// gateway 0 - edge 1 - core 2 - edge 3 - end 4, plus end 5 on edge 1.
inline Topology line5(bool programmable = true, BitsPerSecond bw = 1e8) {
  return Topology::build(
      {{0, NodeKind::gateway, false},
       {1, NodeKind::edge, programmable},
       {2, NodeKind::core, programmable},
       {3, NodeKind::edge, programmable},
       {4, NodeKind::end, false},
       {5, NodeKind::end, false}},
      {{0, 1, bw, 0.001}, {1, 2, bw, 0.001}, {2, 3, bw, 0.001}, {3, 4, bw, 0.001}, {1, 5, bw, 0.001}});
}

// Routing oracle --------------------------------------------------------------

/// Enumerates every shortest path by brute force and picks the
/// lexicographically smallest, taken from the lower endpoint.
inline std::vector<NodeId> oracle_route(const Topology& t, NodeId src, NodeId dst) {
  const NodeId lo = std::min(src, dst), hi = std::max(src, dst);
  std::vector<std::vector<NodeId>> found;
  std::size_t best = SIZE_MAX;
  std::vector<NodeId> cur{lo};
  std::set<NodeId> seen{lo};
  std::function<void()> dfs = [&] {
    if (cur.size() - 1 > best) return;
    if (cur.back() == hi) {
      if (cur.size() - 1 < best) {
        best = cur.size() - 1;
        found.clear();
      }
      found.push_back(cur);
      return;
    }
    for (NodeId n : t.neighbors(cur.back())) {
      if (seen.count(n)) continue;
      seen.insert(n);
      cur.push_back(n);
      dfs();
      cur.pop_back();
      seen.erase(n);
    }
  };
  dfs();
  auto p = *std::min_element(found.begin(), found.end());
  if (src > dst) std::reverse(p.begin(), p.end());
  return p;
}

// Data oracles ----------------------------------------------------------------

/// Brute-force gateway answer: scan every reading.
inline std::vector<SensorReading> oracle_select(const std::vector<SensorReading>& all, const Query& q) {
  std::vector<SensorReading> out;
  for (const auto& r : all)
    if (q.matches(r)) out.push_back(r);
  std::sort(out.begin(), out.end(), key_less);
  return out;
}

using GridPoint = std::pair<SensorId, Seconds>;

inline std::set<GridPoint> grid_points(const SamplingGrid& g, const Query& q) {
  std::set<GridPoint> out;
  for (SensorId s = 0; s < g.sensors(); ++s) {
    if (!q.selects(s)) continue;
    for (std::size_t k = 0; k < g.count; ++k) {
      const Seconds t = g.at(s, k);
      if (q.in_window(t)) out.insert({s, t});
    }
  }
  return out;
}

inline std::set<GridPoint> cached_points(const CacheInstance& c) {
  std::set<GridPoint> out;
  for (const auto& [s, seq] : c.index)
    for (const auto& r : seq) out.insert({s, r.timestamp});
  return out;
}

// Random fixtures -------------------------------------------------------------

/// Connected topology of at most `max_nodes` nodes: one gateway, a few
/// core and edge nodes, end nodes hanging off edges.
inline Topology random_topology(std::mt19937_64& rng, std::size_t max_nodes = 10) {
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const BitsPerSecond bws[] = {1e7, 1e8, 1e9};
  const std::size_t total = pick(4, max_nodes);
  const std::size_t n_edge = pick(1, std::min<std::size_t>(3, total - 2));
  const std::size_t n_core = pick(0, std::min<std::size_t>(3, total - 1 - n_edge - 1));
  const std::size_t n_end = total - 1 - n_edge - n_core;

  std::vector<NodeSpec> nodes{{0, NodeKind::gateway, false}};
  std::vector<NodeId> infra{0}, edges;
  NodeId next = 1;
  for (std::size_t i = 0; i < n_core; ++i) {
    nodes.push_back({next, NodeKind::core, pick(0, 9) < 7});
    infra.push_back(next++);
  }
  for (std::size_t i = 0; i < n_edge; ++i) {
    nodes.push_back({next, NodeKind::edge, pick(0, 9) < 8});
    infra.push_back(next);
    edges.push_back(next++);
  }
  std::shuffle(infra.begin() + 1, infra.end(), rng);

  std::vector<LinkSpec> links;
  std::set<std::pair<NodeId, NodeId>> have;
  auto add = [&](NodeId a, NodeId b) {
    if (a == b || !have.insert({std::min(a, b), std::max(a, b)}).second) return;
    links.push_back({a, b, bws[pick(0, 2)], 0.0001 * static_cast<double>(pick(0, 5))});
  };
  for (std::size_t i = 1; i < infra.size(); ++i) add(infra[i], infra[pick(0, i - 1)]);
  const std::size_t extra = pick(0, infra.size());
  for (std::size_t i = 0; i < extra; ++i) add(infra[pick(0, infra.size() - 1)], infra[pick(0, infra.size() - 1)]);
  for (std::size_t i = 0; i < n_end; ++i) {
    nodes.push_back({next, NodeKind::end, false});
    add(next++, edges[pick(0, edges.size() - 1)]);
  }
  return Topology::build(nodes, links);
}

inline Query random_query(std::mt19937_64& rng, std::size_t n_sensors, Seconds horizon) {
  std::uniform_real_distribution<double> u(0, 1);
  Seconds a = std::floor(u(rng) * horizon);
  Seconds b = std::floor(u(rng) * horizon);
  if (a > b) std::swap(a, b);
  if (b - a < 1) b = std::min(horizon, a + 1);
  if (a >= b) a = b - 1;
  if (u(rng) < 0.4) return Query::all(a, b);
  std::vector<SensorId> ids;
  for (SensorId s = 0; s < n_sensors; ++s)
    if (u(rng) < 0.5) ids.push_back(s);
  if (ids.empty()) ids.push_back(0);
  return Query::of(std::move(ids), a, b);
}

/// A random subset of the readings, as a package.
inline DataPackage random_subset(std::mt19937_64& rng, const std::vector<SensorReading>& all, double p) {
  std::bernoulli_distribution keep(p);
  std::vector<SensorReading> out;
  for (const auto& r : all)
    if (keep(rng)) out.push_back(r);
  return DataPackage::from_entries(std::move(out));
}

/// Store loaded with the readings and closed at `clock`.
inline ReadingStore loaded_store(const std::vector<SensorReading>& readings, Seconds clock) {
  ReadingStore s;
  for (const auto& r : readings) s.ingest(r);
  s.advance_to(clock);
  return s;
}

/// Independent recount of a request's HTTP flows: every source's bytes
/// cross every link from the source to the client.
inline std::map<std::pair<NodeId, NodeId>, Bytes> oracle_http_flows(const Topology& t, const RequestOutcome& o) {
  std::map<std::pair<NodeId, NodeId>, Bytes> out;
  const auto path = route(t, t.gateway(), o.client).nodes;
  for (const auto& src : o.sources) {
    if (src.bytes == 0) continue;
    auto it = std::find(path.begin(), path.end(), src.node);
    for (; it + 1 != path.end(); ++it) out[{*it, *(it + 1)}] += src.bytes;
  }
  return out;
}

inline ScenarioConfig small_config(std::size_t sensors = 100, DeploymentMode mode = DeploymentMode::edge_only) {
  ScenarioConfig c;
  c.topology_path = (source_dir() / "data" / "ref60.topo").string();
  c.mode = mode;
  c.sensors.count = sensors;
  c.output_dir = "";
  return c;
}

}  // namespace sensorcdn::testing
