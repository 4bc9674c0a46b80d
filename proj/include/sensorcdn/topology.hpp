#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sensorcdn/common.hpp"

namespace sensorcdn {

enum class NodeKind { core, edge, end, gateway, control };

inline std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::core: return "core";
    case NodeKind::edge: return "edge";
    case NodeKind::end: return "end";
    case NodeKind::gateway: return "gateway";
    case NodeKind::control: return "control";
  }
  return "?";
}

inline std::optional<NodeKind> parse_node_kind(std::string_view s) {
  if (s == "core") return NodeKind::core;
  if (s == "edge") return NodeKind::edge;
  if (s == "end") return NodeKind::end;
  if (s == "gateway") return NodeKind::gateway;
  if (s == "control") return NodeKind::control;
  return std::nullopt;
}

/// Which programmable nodes take part in cache deployment.
enum class DeploymentMode { legacy, edge_only, edge_plus_core };

inline std::string_view to_string(DeploymentMode m) {
  switch (m) {
    case DeploymentMode::legacy: return "legacy";
    case DeploymentMode::edge_only: return "edge_only";
    case DeploymentMode::edge_plus_core: return "edge_plus_core";
  }
  return "?";
}

inline std::optional<DeploymentMode> parse_mode(std::string_view s) {
  if (s == "legacy") return DeploymentMode::legacy;
  if (s == "edge_only" || s == "edge-only" || s == "E") return DeploymentMode::edge_only;
  if (s == "edge_plus_core" || s == "edge-plus-core" || s == "E+C")
    return DeploymentMode::edge_plus_core;
  return std::nullopt;
}

struct NodeSpec {
  NodeId id = 0;
  NodeKind kind = NodeKind::end;
  bool programmable = false;
  /// Application-level serving throughput. Infinity means non-binding.
  BitsPerSecond serve_rate = std::numeric_limits<double>::infinity();
};

/// Undirected link; endpoints are stored with a < b.
struct LinkSpec {
  NodeId a = 0;
  NodeId b = 0;
  BitsPerSecond bandwidth = 0;
  Seconds latency = 0;

  bool joins(NodeId x, NodeId y) const {
    return (a == x && b == y) || (a == y && b == x);
  }
};

/// Ordered node sequence from source to destination.
struct PathRoute {
  std::vector<NodeId> nodes;

  std::size_t hops() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  bool operator==(const PathRoute&) const = default;
};

/// Validated, immutable network graph.
class Topology {
 public:
  /// Validates and builds. Throws TopologyError naming the offending element.
  static Topology build(std::vector<NodeSpec> nodes, std::vector<LinkSpec> links) {
    Topology t;
    for (const auto& n : nodes) {
      if (t.index_.count(n.id)) {
        throw TopologyError("duplicate node id " + std::to_string(n.id));
      }
      if (!(n.serve_rate > 0)) {
        throw TopologyError("node " + std::to_string(n.id) + " has non-positive serve_rate");
      }
      t.index_.emplace(n.id, t.nodes_.size());
      t.nodes_.push_back(n);
    }
    std::size_t gateways = 0;
    for (const auto& n : t.nodes_) {
      if (n.kind == NodeKind::gateway) {
        ++gateways;
        t.gateway_ = n.id;
      }
    }
    if (gateways != 1) {
      throw TopologyError("topology must have exactly one gateway node, found " +
                          std::to_string(gateways));
    }

    for (auto l : links) {
      const std::string name = "link " + std::to_string(l.a) + "-" + std::to_string(l.b);
      if (!t.index_.count(l.a) || !t.index_.count(l.b)) {
        throw TopologyError(name + " references an unknown node");
      }
      if (l.a == l.b) throw TopologyError(name + " is a self-loop");
      if (!(l.bandwidth > 0)) throw TopologyError(name + " has non-positive bandwidth");
      if (!(l.latency >= 0)) throw TopologyError(name + " has negative latency");
      if (l.a > l.b) std::swap(l.a, l.b);
      if (t.link_index_.count({l.a, l.b})) throw TopologyError("duplicate " + name);
      t.link_index_.emplace(std::pair{l.a, l.b}, t.links_.size());
      t.links_.push_back(l);
      t.adjacency_[l.a].push_back(l.b);
      t.adjacency_[l.b].push_back(l.a);
    }
    for (auto& [id, nbrs] : t.adjacency_) std::sort(nbrs.begin(), nbrs.end());

    for (const auto& n : t.nodes_) {
      if (n.kind != NodeKind::end && n.kind != NodeKind::control) continue;
      const auto& nb = t.neighbors(n.id);
      if (nb.size() != 1) {
        throw TopologyError(std::string(to_string(n.kind)) + " node " + std::to_string(n.id) +
                            " must have exactly one link, has " + std::to_string(nb.size()));
      }
      if (t.node(nb.front()).kind != NodeKind::edge) {
        throw TopologyError(std::string(to_string(n.kind)) + " node " + std::to_string(n.id) +
                            " must attach to an edge node, attaches to " +
                            std::to_string(nb.front()));
      }
    }

    if (!t.nodes_.empty()) {
      const auto dist = t.hop_distances(t.nodes_.front().id);
      for (const auto& n : t.nodes_) {
        if (!dist.count(n.id)) {
          throw TopologyError("graph is disconnected: node " + std::to_string(n.id) +
                              " unreachable from node " + std::to_string(t.nodes_.front().id));
        }
      }
    }
    return t;
  }

  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  NodeId gateway() const { return gateway_; }

  bool contains(NodeId id) const { return index_.count(id) != 0; }

  const NodeSpec& node(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw TopologyError("unknown node id " + std::to_string(id));
    return nodes_[it->second];
  }

  const LinkSpec* find_link(NodeId x, NodeId y) const {
    auto it = link_index_.find({std::min(x, y), std::max(x, y)});
    return it == link_index_.end() ? nullptr : &links_[it->second];
  }

  const LinkSpec& link(NodeId x, NodeId y) const {
    const auto* l = find_link(x, y);
    if (!l) {
      throw TopologyError("no link between " + std::to_string(x) + " and " + std::to_string(y));
    }
    return *l;
  }

  /// Sorted ascending.
  const std::vector<NodeId>& neighbors(NodeId id) const {
    static const std::vector<NodeId> none;
    auto it = adjacency_.find(id);
    return it == adjacency_.end() ? none : it->second;
  }

  std::vector<NodeId> nodes_of_kind(NodeKind k) const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_)
      if (n.kind == k) out.push_back(n.id);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// BFS hop distances from `from` to every reachable node.
  std::map<NodeId, std::size_t> hop_distances(NodeId from) const {
    std::map<NodeId, std::size_t> dist;
    std::deque<NodeId> frontier{from};
    dist[from] = 0;
    while (!frontier.empty()) {
      NodeId u = frontier.front();
      frontier.pop_front();
      for (NodeId v : neighbors(u)) {
        if (dist.emplace(v, dist[u] + 1).second) frontier.push_back(v);
      }
    }
    return dist;
  }

 private:
  std::vector<NodeSpec> nodes_;
  std::vector<LinkSpec> links_;
  std::map<NodeId, std::size_t> index_;
  std::map<std::pair<NodeId, NodeId>, std::size_t> link_index_;
  std::map<NodeId, std::vector<NodeId>> adjacency_;
  NodeId gateway_ = 0;
};

/// Parses the line-oriented topology description:
///
///   node <id> <kind> <programmable 0|1> [serve_rate_bps]
///   link <a> <b> <bandwidth_bps> <latency_s>
///
/// '#' starts a comment. Errors carry the line number.
inline Topology load_topology(std::string_view document) {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::istringstream in{std::string(document)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string w; ls >> w;) tok.push_back(w);
    if (tok.empty()) continue;

    auto fail = [&](const std::string& what) {
      return TopologyError("parse error at line " + std::to_string(lineno) + ": " + what);
    };
    auto to_id = [&](const std::string& s) -> NodeId {
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(s, &used);
      } catch (const std::exception&) {
        throw fail("bad node id '" + s + "'");
      }
      if (used != s.size() || v > std::numeric_limits<NodeId>::max())
        throw fail("bad node id '" + s + "'");
      return static_cast<NodeId>(v);
    };
    auto to_num = [&](const std::string& s, const char* what) -> double {
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(s, &used);
      } catch (const std::exception&) {
        throw fail(std::string("bad ") + what + " '" + s + "'");
      }
      if (used != s.size()) throw fail(std::string("bad ") + what + " '" + s + "'");
      return v;
    };

    if (tok[0] == "node") {
      if (tok.size() != 4 && tok.size() != 5) throw fail("node record needs 3 or 4 fields");
      NodeSpec n;
      n.id = to_id(tok[1]);
      auto kind = parse_node_kind(tok[2]);
      if (!kind) throw fail("unknown node kind '" + tok[2] + "'");
      n.kind = *kind;
      if (tok[3] != "0" && tok[3] != "1") throw fail("programmable flag must be 0 or 1");
      n.programmable = tok[3] == "1";
      if (tok.size() == 5) n.serve_rate = to_num(tok[4], "serve_rate");
      nodes.push_back(n);
    } else if (tok[0] == "link") {
      if (tok.size() != 5) throw fail("link record needs 4 fields");
      links.push_back({to_id(tok[1]), to_id(tok[2]), to_num(tok[3], "bandwidth"),
                       to_num(tok[4], "latency")});
    } else {
      throw fail("unknown record '" + tok[0] + "'");
    }
  }
  return Topology::build(std::move(nodes), std::move(links));
}

inline std::string to_text(const Topology& t) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& n : t.nodes()) {
    out << "node " << n.id << ' ' << to_string(n.kind) << ' ' << (n.programmable ? 1 : 0);
    if (std::isfinite(n.serve_rate)) out << ' ' << n.serve_rate;
    out << '\n';
  }
  for (const auto& l : t.links()) {
    out << "link " << l.a << ' ' << l.b << ' ' << l.bandwidth << ' ' << l.latency << '\n';
  }
  return out.str();
}

struct ProfileViolation {
  std::string rule;
  std::string message;
};

/// Checks the reference-testbed wiring rules. Report-only: never throws.
inline std::vector<ProfileViolation> validate_reference_profile(const Topology& t) {
  constexpr BitsPerSecond kGatewayUplink = 10e6;
  constexpr BitsPerSecond kEdgeSide = 1e9;
  constexpr BitsPerSecond kCoreSide = 100e6;

  std::vector<ProfileViolation> out;
  for (NodeId e : t.nodes_of_kind(NodeKind::edge)) {
    std::size_t cores = 0;
    for (NodeId n : t.neighbors(e))
      if (t.node(n).kind == NodeKind::core) ++cores;
    if (cores < 2) {
      out.push_back({"edge-core-links", "edge " + std::to_string(e) + " has " +
                                            std::to_string(cores) + " core links"});
    }
  }
  for (const auto& l : t.links()) {
    const auto ka = t.node(l.a).kind;
    const auto kb = t.node(l.b).kind;
    const std::string name = std::to_string(l.a) + "-" + std::to_string(l.b);
    auto is = [&](NodeKind k) { return ka == k || kb == k; };
    if (is(NodeKind::gateway)) {
      if (l.bandwidth != kGatewayUplink) {
        out.push_back({"gateway-uplink", "gateway uplink " + name + " is " +
                                             format_fixed(l.bandwidth, 0) +
                                             " b/s, expected 10 Mb/s"});
      }
    } else if (is(NodeKind::core)) {
      if (l.bandwidth != kCoreSide) {
        out.push_back({"core-side-bandwidth", "core-side link " + name + " is " +
                                                  format_fixed(l.bandwidth, 0) +
                                                  " b/s, expected 100 Mb/s"});
      }
    } else if (l.bandwidth != kEdgeSide) {
      out.push_back({"edge-side-bandwidth", "edge-side link " + name + " is " +
                                                format_fixed(l.bandwidth, 0) +
                                                " b/s, expected 1 Gb/s"});
    }
  }
  return out;
}

namespace detail {

// Lexicographically smallest shortest path, computed from the smaller endpoint.
inline std::vector<NodeId> canonical_route(const Topology& t, NodeId from, NodeId to) {
  const auto dist_to = t.hop_distances(to);
  auto it = dist_to.find(from);
  if (it == dist_to.end()) {
    throw TopologyError("no path from " + std::to_string(from) + " to " + std::to_string(to));
  }
  std::vector<NodeId> path{from};
  NodeId cur = from;
  std::size_t remaining = it->second;
  while (remaining > 0) {
    for (NodeId n : t.neighbors(cur)) {
      auto d = dist_to.find(n);
      if (d != dist_to.end() && d->second == remaining - 1) {
        cur = n;
        break;
      }
    }
    path.push_back(cur);
    --remaining;
  }
  return path;
}

}  // namespace detail

/// Deterministic hop-count shortest path. Ties go to the lexicographically
/// smallest id sequence taken from the lower-numbered endpoint, which makes
/// route(b, a) == reverse(route(a, b)).
inline PathRoute route(const Topology& t, NodeId src, NodeId dst) {
  if (!t.contains(src)) throw TopologyError("unknown node id " + std::to_string(src));
  if (!t.contains(dst)) throw TopologyError("unknown node id " + std::to_string(dst));
  if (src <= dst) return {detail::canonical_route(t, src, dst)};
  auto p = detail::canonical_route(t, dst, src);
  std::reverse(p.begin(), p.end());
  return {std::move(p)};
}

inline bool participates(const NodeSpec& n, DeploymentMode mode) {
  if (!n.programmable) return false;
  switch (mode) {
    case DeploymentMode::legacy: return false;
    case DeploymentMode::edge_only: return n.kind == NodeKind::edge;
    case DeploymentMode::edge_plus_core:
      return n.kind == NodeKind::edge || n.kind == NodeKind::core;
  }
  return false;
}

/// Programmable nodes on the path interior, in path order.
inline std::vector<NodeId> programmable_chain(const Topology& t, const PathRoute& p,
                                              DeploymentMode mode) {
  std::vector<NodeId> out;
  if (p.nodes.size() < 3) return out;
  for (std::size_t i = 1; i + 1 < p.nodes.size(); ++i) {
    if (participates(t.node(p.nodes[i]), mode)) out.push_back(p.nodes[i]);
  }
  return out;
}

}  // namespace sensorcdn
