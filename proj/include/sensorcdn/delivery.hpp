#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sensorcdn/cache.hpp"
#include "sensorcdn/common.hpp"
#include "sensorcdn/flow.hpp"
#include "sensorcdn/sensordata.hpp"
#include "sensorcdn/signaling.hpp"
#include "sensorcdn/topology.hpp"

namespace sensorcdn {

enum class Forwarding { pipelined, store_and_forward };
enum class Concurrency { sequential, equal_share };

inline std::string_view to_string(Forwarding f) {
  return f == Forwarding::pipelined ? "pipelined" : "store_and_forward";
}
inline std::string_view to_string(Concurrency c) {
  return c == Concurrency::sequential ? "sequential" : "equal_share";
}

struct ModelParams {
  PackageCost package;
  /// Fraction of link bandwidth available as application goodput.
  double goodput = 0.85;
  HandshakeParams handshake;
  /// Request/response processing including the HTTP redirect.
  Seconds processing = 0.01;
  Forwarding forwarding = Forwarding::pipelined;
  /// When false, a client whose redirect target already covers the query
  /// is redirected without a new handshake.
  bool resignal_warm_paths = true;
};

struct TimingBreakdown {
  Seconds t_creation = 0;
  Seconds t_signaling = 0;
  Seconds t_processing = 0;
  Seconds t_http = 0;

  Seconds total() const { return t_creation + t_signaling + t_processing + t_http; }
};

struct SegmentTransfer {
  std::vector<NodeId> nodes;
  Bytes bytes = 0;
  BitsPerSecond effective_rate = std::numeric_limits<double>::infinity();
  Seconds duration = 0;
};

/// Number of flows sharing a directed link (>= 1).
using LinkShare = std::function<std::size_t(NodeId from, NodeId to)>;

/// Bottleneck model: rate = min(goodput * bandwidth / share over the links,
/// serve_rate of the serving node); duration = bits / rate + sum of latencies.
inline SegmentTransfer transfer(const Topology& t, std::span<const NodeId> segment, Bytes bytes,
                                NodeId serving, double goodput, const LinkShare& share = {}) {
  SegmentTransfer st;
  st.nodes.assign(segment.begin(), segment.end());
  st.bytes = bytes;
  if (segment.size() < 2) {
    if (bytes > 0) throw ModelError("transfer of " + std::to_string(bytes) + " bytes over an empty segment");
    return st;
  }
  Seconds latency = 0;
  BitsPerSecond rate = t.node(serving).serve_rate;
  for (std::size_t i = 0; i + 1 < segment.size(); ++i) {
    const auto& l = t.link(segment[i], segment[i + 1]);
    latency += l.latency;
    double bw = goodput * l.bandwidth;
    if (share) bw /= static_cast<double>(std::max<std::size_t>(1, share(segment[i], segment[i + 1])));
    rate = std::min(rate, bw);
  }
  st.effective_rate = rate;
  st.duration = latency + (bytes > 0 ? static_cast<double>(bytes) * 8.0 / rate : 0.0);
  return st;
}

inline Seconds transfer_time(const Topology& t, std::span<const NodeId> segment, Bytes bytes,
                             NodeId serving, double goodput = 1.0) {
  return transfer(t, segment, bytes, serving, goodput).duration;
}

struct SourceContribution {
  NodeId node = 0;
  std::size_t entries = 0;
  Bytes bytes = 0;
};

struct ServedSummary {
  std::size_t entries = 0;
  Bytes bytes = 0;
  std::uint64_t digest = 0;
};

struct RequestOutcome {
  std::size_t index = 0;
  NodeId client = 0;
  DeploymentMode mode = DeploymentMode::legacy;
  Query query;
  Seconds start = 0;
  TimingBreakdown timing;
  ServedSummary served;
  /// Retained only when the state asks for it.
  std::optional<DataPackage> package;
  std::vector<SourceContribution> sources;
  std::vector<LinkFlow> flows;
  std::vector<NodeId> chain;
  NodeId redirect_target = 0;
  bool signaled = false;
  /// REMOVE messages sent right before this request, if any.
  bool preceded_by_remove = false;

  Seconds end() const { return start + timing.total(); }
  Bytes bytes(TrafficClass c) const { return byte_hops(flows, c); }
};

/// Everything a single run mutates while serving requests.
struct DeliveryState {
  DeliveryState(const Topology& topology, const SamplingGrid& sampling, const ReadingStore& gw_store,
                ModelParams model)
      : topo(&topology), grid(&sampling), store(&gw_store), caches(topology),
        params(std::move(model)) {}

  const Topology* topo;
  const SamplingGrid* grid;
  const ReadingStore* store;
  CacheRegistry caches;
  ModelParams params;
  bool keep_packages = true;

  /// Packages already built by the gateway, reused in programmable modes.
  std::map<Query, DataPackage> gateway_memo;
  std::map<NodeId, ConfiguredChain> known_chains;
  std::vector<SignalingSession> sessions;
  std::vector<TraceRecord> trace;
  std::uint64_t next_session = 1;

  /// Equal-share bookkeeping: (end time, directed links) of in-flight transfers.
  Concurrency concurrency = Concurrency::sequential;
  std::vector<std::pair<Seconds, std::vector<std::pair<NodeId, NodeId>>>> in_flight;

  void warn(std::string w) { caches.warn(std::move(w)); }
};

struct ChainedDownload {
  DataPackage package;
  Seconds duration = 0;
  Seconds creation_time = 0;
  std::vector<LinkFlow> flows;
  std::vector<SourceContribution> sources;
  /// Caches to fill on completion with the data they forwarded.
  std::vector<std::pair<NodeId, DataPackage>> fills;
  std::vector<std::pair<NodeId, NodeId>> links;
};

namespace detail {

inline DataPackage gateway_answer(DeliveryState& st, const Query& q, bool memoize,
                                  Seconds& creation) {
  if (memoize) {
    if (auto it = st.gateway_memo.find(q); it != st.gateway_memo.end()) return it->second;
  }
  auto built = build_package(*st.store, q, st.params.package);
  creation += built.creation_time;
  if (memoize) st.gateway_memo.emplace(q, built.package);
  return std::move(built.package);
}

}  // namespace detail

/// Recursive pull from the redirect target toward the gateway. Each level
/// answers from its own entries and asks its upstream only for the residual.
/// Missing or expired caches are skipped with a warning.
inline ChainedDownload chained_download(DeliveryState& st, const ConfiguredChain& chain,
                                        const PathRoute& path, const Query& q, Seconds now,
                                        bool memoize = true) {
  const Topology& t = *st.topo;
  const NodeId gateway = path.nodes.front();
  ChainedDownload out;

  // contributions[level]: level 0 is the gateway, level k the k-th cache.
  std::vector<NodeId> level_node{gateway};
  for (NodeId c : chain.caches) level_node.push_back(c);
  std::vector<DataPackage> contribution(level_node.size());

  std::function<DataPackage(std::size_t, const std::vector<Query>&)> pull =
      [&](std::size_t level, const std::vector<Query>& queries) -> DataPackage {
    if (queries.empty()) return {};
    if (level == 0) {
      DataPackage answer;
      for (const auto& rq : queries)
        answer = package_union(answer, detail::gateway_answer(st, rq, memoize, out.creation_time));
      contribution[0] = package_union(contribution[0], answer);
      return answer;
    }
    const NodeId node = level_node[level];
    CacheInstance* cache = st.caches.find_live(node, now);
    if (!cache) {
      st.warn("cache on node " + std::to_string(node) +
              " missing or expired during download; forwarding transparently");
      return pull(level - 1, queries);
    }
    std::vector<SensorReading> hits;
    std::vector<Query> residual;
    for (const auto& rq : queries) {
      auto r = lookup(*cache, rq, *st.grid, now);
      hits.insert(hits.end(), r.hits.begin(), r.hits.end());
      residual.insert(residual.end(), r.residual.begin(), r.residual.end());
    }
    auto own = DataPackage::from_entries(std::move(hits), st.params.package.envelope_bytes);
    contribution[level] = package_union(contribution[level], own);
    auto answer = package_union(own, pull(level - 1, residual));
    out.fills.emplace_back(node, answer);
    return answer;
  };

  out.package = pull(level_node.size() - 1, {q});

  auto index_of = [&](NodeId n) {
    auto it = std::find(path.nodes.begin(), path.nodes.end(), n);
    if (it == path.nodes.end()) throw ModelError("node " + std::to_string(n) + " not on path");
    return static_cast<std::size_t>(it - path.nodes.begin());
  };
  const std::size_t last = path.nodes.size() - 1;
  LinkShare share;
  if (st.concurrency == Concurrency::equal_share) {
    share = [&st, now](NodeId a, NodeId b) {
      std::size_t n = 1;
      for (const auto& [end, links] : st.in_flight)
        if (end > now && std::find(links.begin(), links.end(), std::pair{a, b}) != links.end()) ++n;
      return n;
    };
  }

  auto segment = [&](std::size_t from, std::size_t to) {
    return std::span<const NodeId>(path.nodes.data() + from, to - from + 1);
  };

  // Sources from the client side outward so the redirect target comes first.
  for (std::size_t level = level_node.size(); level-- > 0;) {
    const auto& pkg = contribution[level];
    const bool is_target = level == level_node.size() - 1;
    if (pkg.empty() && !is_target) continue;
    const NodeId node = level_node[level];
    out.sources.push_back({node, pkg.size(), pkg.byte_size()});
    const std::size_t from = index_of(node);
    for (std::size_t i = from; i < last; ++i) {
      if (pkg.byte_size() > 0) {
        out.flows.push_back({path.nodes[i], path.nodes[i + 1], TrafficClass::http, pkg.byte_size()});
      }
      out.links.emplace_back(path.nodes[i], path.nodes[i + 1]);
    }
  }
  std::sort(out.links.begin(), out.links.end());
  out.links.erase(std::unique(out.links.begin(), out.links.end()), out.links.end());

  const double goodput = st.params.goodput;
  if (st.params.forwarding == Forwarding::pipelined) {
    Seconds longest = -1;
    for (const auto& src : out.sources) {
      if (src.bytes == 0) continue;
      longest = std::max(longest,
                         transfer(t, segment(index_of(src.node), last), src.bytes, src.node, goodput, share).duration);
    }
    if (longest < 0) {
      longest = transfer(t, segment(index_of(chain.redirect_target), last), 0,
                         chain.redirect_target, goodput, share).duration;
    }
    out.duration = longest;
  } else {
    // Relay points gateway, caches..., client; each relay waits for the
    // full upstream payload before forwarding.
    std::vector<std::size_t> relay;
    for (NodeId n : level_node) relay.push_back(index_of(n));
    relay.push_back(last);
    Bytes carried = 0;
    Seconds total = 0;
    for (std::size_t k = 0; k + 1 < relay.size(); ++k) {
      carried += contribution[k].byte_size();
      if (carried == 0) continue;
      total += transfer(t, segment(relay[k], relay[k + 1]), carried, level_node[k], goodput, share).duration;
    }
    if (carried == 0) {
      total = transfer(t, segment(index_of(chain.redirect_target), last), 0,
                       chain.redirect_target, goodput, share).duration;
    }
    out.duration = total;
  }
  return out;
}

/// A planned request whose cache fills are still to be applied.
struct RequestPlan {
  RequestOutcome outcome;
  std::vector<std::pair<NodeId, DataPackage>> fills;
  std::vector<std::pair<NodeId, NodeId>> links;
};

/// Validates, signals (when the mode and warm-path policy require it),
/// pulls the data and computes the timing decomposition. Caches are not
/// touched beyond installation; see apply_fills.
inline RequestPlan plan_request(DeliveryState& st, NodeId client, const Query& q,
                                DeploymentMode mode, Seconds now, std::size_t index = 0) {
  const Topology& t = *st.topo;
  if (!t.contains(client)) throw QueryError("unknown client node " + std::to_string(client));
  if (t.node(client).kind != NodeKind::end) {
    throw QueryError("node " + std::to_string(client) + " is a " +
                     std::string(to_string(t.node(client).kind)) + " node, not a client");
  }
  q.validate();
  if (q.t_end > st.store->clock() || q.t_end > now) {
    throw QueryError("query window must be closed: ends at " + format_fixed(q.t_end, 6) +
                     ", now " + format_fixed(now, 6));
  }

  RequestPlan plan;
  RequestOutcome& o = plan.outcome;
  o.index = index;
  o.client = client;
  o.mode = mode;
  o.query = q;
  o.start = now;
  o.timing.t_processing = st.params.processing;

  SignalingSession session = start_session(t, t.gateway(), client, mode, st.next_session++);
  std::vector<LinkFlow> flows;
  ConfiguredChain chain = make_chain({}, t.gateway());

  if (mode != DeploymentMode::legacy) {
    bool reuse = false;
    if (!st.params.resignal_warm_paths) {
      if (auto it = st.known_chains.find(client); it != st.known_chains.end() && !it->second.empty()) {
        const auto* target = st.caches.find(it->second.redirect_target);
        reuse = target && covers(*target, q, *st.grid, now);
        if (reuse) chain = it->second;
      }
    }
    if (!reuse) {
      auto hs = run_handshake(session, t, st.caches, st.params.handshake, now);
      chain = hs.chain;
      o.signaled = true;
      o.timing.t_signaling = hs.latency;
      flows.insert(flows.end(), hs.flows.begin(), hs.flows.end());
      st.trace.insert(st.trace.end(), session.trace.begin(), session.trace.end());
      st.known_chains[client] = chain;
    }
  }

  const Seconds data_time = now + o.timing.t_signaling;
  auto dl = chained_download(st, chain, session.path, q, data_time,
                             /*memoize=*/mode != DeploymentMode::legacy);
  o.timing.t_creation = dl.creation_time;
  o.timing.t_http = dl.duration;
  o.sources = dl.sources;
  o.chain = chain.caches;
  o.redirect_target = chain.redirect_target;
  o.served = {dl.package.size(), dl.package.byte_size(), content_digest(dl.package)};
  if (st.keep_packages) o.package = std::move(dl.package);
  flows.insert(flows.end(), dl.flows.begin(), dl.flows.end());
  o.flows = aggregate(flows);

  if (o.signaled) {
    session.phase = SessionPhase::done;
    st.sessions.push_back(std::move(session));
  }
  plan.fills = std::move(dl.fills);
  plan.links = std::move(dl.links);
  return plan;
}

/// Stores forwarded data into the chain caches at completion time.
inline void apply_fills(DeliveryState& st, const RequestPlan& plan, Seconds at) {
  for (const auto& [node, pkg] : plan.fills) {
    auto* c = st.caches.find_live(node, at);
    if (!c) {
      st.warn("cache on node " + std::to_string(node) + " expired before it could store request " +
              std::to_string(plan.outcome.index) + " data");
      continue;
    }
    store_entries(*c, pkg, at);
  }
}

/// Serves one request end to end and fills the chain caches.
inline RequestOutcome client_request(DeliveryState& st, NodeId client, const Query& q,
                                     DeploymentMode mode, Seconds now, std::size_t index = 0) {
  auto plan = plan_request(st, client, q, mode, now, index);
  apply_fills(st, plan, plan.outcome.end());
  return std::move(plan.outcome);
}

/// Gateway-initiated REMOVE over every configured session. Returns the
/// signaling flows.
inline std::vector<LinkFlow> remove_all(DeliveryState& st, Seconds now) {
  std::vector<LinkFlow> flows;
  for (auto& s : st.sessions) {
    if (s.phase != SessionPhase::configured && s.phase != SessionPhase::done) continue;
    // Chains already torn down by an earlier REMOVE need no new message.
    const bool any_installed =
        s.chain && std::any_of(s.chain->caches.begin(), s.chain->caches.end(), [&](NodeId n) {
          return st.caches.find(n, st.params.handshake.bundle) != nullptr;
        });
    if (!any_installed) {
      s.phase = SessionPhase::removed;
      continue;
    }
    const std::size_t trace_from = s.trace.size();
    auto r = send_remove(s, *st.topo, st.caches, st.params.handshake.message_bytes, now,
                         st.params.handshake.bundle);
    flows.insert(flows.end(), r.flows.begin(), r.flows.end());
    st.trace.insert(st.trace.end(), s.trace.begin() + static_cast<std::ptrdiff_t>(trace_from),
                    s.trace.end());
  }
  st.known_chains.clear();
  return flows;
}

}  // namespace sensorcdn
