#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sensorcdn/cache.hpp"
#include "sensorcdn/common.hpp"
#include "sensorcdn/flow.hpp"
#include "sensorcdn/topology.hpp"

namespace sensorcdn {

/// Upstream assignment: cache node -> node it pulls from.
using UpstreamMap = std::map<NodeId, NodeId>;

struct Setup {
  std::string bundle = kSensorCdnBundle;
  Seconds ttl = 600;
  /// Present on the configuring SETUP only.
  std::optional<UpstreamMap> chain_config;
};

struct Probe {
  std::vector<NodeId> collected;
  std::string capabilities = "sensor_cdn/1";
};

struct ProbeResponse {
  std::vector<NodeId> collected;
};

struct Remove {
  std::string bundle = kSensorCdnBundle;
};

struct NslpMessage {
  std::variant<Setup, Probe, ProbeResponse, Remove> body;
  Bytes wire_size = 128;

  std::string_view variant_name() const {
    switch (body.index()) {
      case 0: return std::get<Setup>(body).chain_config ? "SETUP_CONFIG" : "SETUP";
      case 1: return "PROBE";
      case 2: return "PROBE_RESPONSE";
      default: return "REMOVE";
    }
  }
};

enum class SessionPhase { idle, setup_sent, probed, configured, done, removed };

inline std::string_view to_string(SessionPhase p) {
  switch (p) {
    case SessionPhase::idle: return "idle";
    case SessionPhase::setup_sent: return "setup_sent";
    case SessionPhase::probed: return "probed";
    case SessionPhase::configured: return "configured";
    case SessionPhase::done: return "done";
    case SessionPhase::removed: return "removed";
  }
  return "?";
}

/// One message crossing one link.
struct TraceRecord {
  Seconds time = 0;
  std::string variant;
  NodeId from = 0;
  NodeId to = 0;
  Bytes bytes = 0;
};

struct Interception {
  NodeId node = 0;
  std::size_t path_index = 0;
};

/// Cache chain as configured by the gateway, ordered gateway -> client.
struct ConfiguredChain {
  std::vector<NodeId> caches;
  UpstreamMap upstream_of;
  NodeId redirect_target = 0;

  bool empty() const { return caches.empty(); }
};

/// Upstream of each cache is the previous cache toward the gateway; the
/// first cache pulls from the gateway.
inline ConfiguredChain make_chain(const std::vector<NodeId>& caches, NodeId gateway) {
  ConfiguredChain c;
  c.caches = caches;
  NodeId up = gateway;
  for (NodeId n : caches) {
    c.upstream_of[n] = up;
    up = n;
  }
  c.redirect_target = caches.empty() ? gateway : caches.back();
  return c;
}

struct SignalingSession {
  std::uint64_t id = 0;
  NodeId initiator = 0;
  NodeId target = 0;
  PathRoute path;
  DeploymentMode mode = DeploymentMode::legacy;
  SessionPhase phase = SessionPhase::idle;
  bool probe_outstanding = false;
  std::optional<ConfiguredChain> chain;
  Seconds latency = 0;
  std::vector<LinkFlow> flows;
  std::vector<TraceRecord> trace;

  Bytes signaling_bytes() const { return byte_hops(flows, TrafficClass::signaling); }
};

inline SignalingSession start_session(const Topology& t, NodeId gateway, NodeId client,
                                      DeploymentMode mode, std::uint64_t id = 0) {
  SignalingSession s;
  s.id = id;
  s.initiator = gateway;
  s.target = client;
  s.path = route(t, gateway, client);
  s.mode = mode;
  return s;
}

/// Sends one message along the session path. Non-participating nodes
/// forward transparently; participating ones intercept in traversal order.
/// Every traversed link is charged msg.wire_size signaling bytes.
inline std::vector<Interception> propagate(SignalingSession& s, NslpMessage& msg,
                                           const Topology& t, Seconds now = 0) {
  auto illegal = [&] {
    return ProtocolError(std::string(msg.variant_name()) + " is illegal in phase " +
                         std::string(to_string(s.phase)) + " of session " + std::to_string(s.id));
  };
  bool upstream = false;
  SessionPhase next = s.phase;
  bool outstanding = s.probe_outstanding;
  if (auto* setup = std::get_if<Setup>(&msg.body)) {
    if (!(setup->ttl > 0)) throw ProtocolError("SETUP ttl must be positive");
    if (!setup->chain_config) {
      if (s.phase != SessionPhase::idle) throw illegal();
      next = SessionPhase::setup_sent;
    } else {
      if (s.phase != SessionPhase::probed) throw illegal();
      next = SessionPhase::configured;
    }
  } else if (std::holds_alternative<Probe>(msg.body)) {
    if (s.phase != SessionPhase::setup_sent || s.probe_outstanding) throw illegal();
    outstanding = true;
  } else if (std::holds_alternative<ProbeResponse>(msg.body)) {
    if (s.phase != SessionPhase::setup_sent || !s.probe_outstanding) throw illegal();
    outstanding = false;
    next = SessionPhase::probed;
    upstream = true;
  } else {
    if (s.phase != SessionPhase::configured && s.phase != SessionPhase::done) throw illegal();
    next = SessionPhase::removed;
  }

  std::vector<NodeId> hops = s.path.nodes;
  if (upstream) std::reverse(hops.begin(), hops.end());
  const std::string name(msg.variant_name());
  for (std::size_t i = 0; i + 1 < hops.size(); ++i) {
    s.flows.push_back({hops[i], hops[i + 1], TrafficClass::signaling, msg.wire_size});
    s.trace.push_back({now, name, hops[i], hops[i + 1], msg.wire_size});
  }

  std::vector<Interception> out;
  if (hops.size() >= 3) {
    for (std::size_t i = 1; i + 1 < hops.size(); ++i) {
      if (!participates(t.node(hops[i]), s.mode)) continue;
      out.push_back({hops[i], upstream ? hops.size() - 1 - i : i});
      if (auto* probe = std::get_if<Probe>(&msg.body)) probe->collected.push_back(hops[i]);
    }
  }
  s.phase = next;
  s.probe_outstanding = outstanding;
  return out;
}

struct HandshakeParams {
  Seconds ttl = 600;
  Seconds latency = 1.6;
  Bytes message_bytes = 128;
  /// Per fresh install, carried gateway -> node.
  Bytes bundle_bytes = 0;
  std::string bundle = kSensorCdnBundle;
};

struct HandshakeResult {
  ConfiguredChain chain;
  Seconds latency = 0;
  std::vector<LinkFlow> flows;
  std::vector<NodeId> fresh_installs;

  std::map<std::pair<NodeId, NodeId>, Bytes> signaling_bytes_per_link() const {
    std::map<std::pair<NodeId, NodeId>, Bytes> m;
    for (const auto& f : flows)
      if (f.cls == TrafficClass::signaling) m[{f.from, f.to}] += f.bytes;
    return m;
  }
};

/// SETUP (install) -> PROBE -> PROBE_RESPONSE -> SETUP (configure).
/// Legacy sessions skip signaling entirely and keep the gateway as target.
inline HandshakeResult run_handshake(SignalingSession& s, const Topology& t, CacheRegistry& caches,
                                     const HandshakeParams& params, Seconds now) {
  if (s.phase != SessionPhase::idle) {
    throw ProtocolError("handshake requires an idle session, session " + std::to_string(s.id) +
                        " is " + std::string(to_string(s.phase)));
  }
  HandshakeResult r;
  if (s.mode == DeploymentMode::legacy) {
    r.chain = make_chain({}, s.initiator);
    s.chain = r.chain;
    s.phase = SessionPhase::configured;
    return r;
  }
  const std::size_t first_flow = s.flows.size();
  const Seconds step = params.latency / 4;

  NslpMessage install{Setup{params.bundle, params.ttl, std::nullopt}, params.message_bytes};
  for (const auto& hit : propagate(s, install, t, now)) {
    bool fresh = false;
    caches.install(hit.node, params.bundle, params.ttl, now, &fresh);
    if (!fresh) continue;
    r.fresh_installs.push_back(hit.node);
    if (params.bundle_bytes == 0) continue;
    for (std::size_t i = 0; i < hit.path_index; ++i) {
      s.flows.push_back(
          {s.path.nodes[i], s.path.nodes[i + 1], TrafficClass::bundle, params.bundle_bytes});
    }
  }

  NslpMessage probe{Probe{}, params.message_bytes};
  propagate(s, probe, t, now + step);
  NslpMessage response{ProbeResponse{std::get<Probe>(probe.body).collected},
                       params.message_bytes};
  propagate(s, response, t, now + 2 * step);

  r.chain = make_chain(std::get<ProbeResponse>(response.body).collected, s.initiator);
  NslpMessage configure{Setup{params.bundle, params.ttl, r.chain.upstream_of},
                        params.message_bytes};
  for (const auto& hit : propagate(s, configure, t, now + 3 * step)) {
    if (auto* c = caches.find_live(hit.node, now, params.bundle)) {
      c->upstream = r.chain.upstream_of.at(hit.node);
    }
  }

  s.chain = r.chain;
  s.latency = params.latency;
  r.latency = params.latency;
  r.flows.assign(s.flows.begin() + static_cast<std::ptrdiff_t>(first_flow), s.flows.end());
  return r;
}

struct RemoveResult {
  std::vector<LinkFlow> flows;
  std::vector<NodeId> uninstalled;
};

/// Tears down every cache on the session's chain. No-op for an empty chain.
inline RemoveResult send_remove(SignalingSession& s, const Topology& t, CacheRegistry& caches,
                                Bytes message_bytes, Seconds now,
                                const std::string& bundle = kSensorCdnBundle) {
  RemoveResult r;
  if (s.phase != SessionPhase::configured && s.phase != SessionPhase::done) {
    throw ProtocolError("REMOVE requires a configured session, session " +
                        std::to_string(s.id) + " is " + std::string(to_string(s.phase)));
  }
  if (!s.chain || s.chain->empty()) return r;
  const std::size_t first_flow = s.flows.size();
  NslpMessage msg{Remove{bundle}, message_bytes};
  for (const auto& hit : propagate(s, msg, t, now)) {
    if (caches.uninstall(hit.node, bundle)) r.uninstalled.push_back(hit.node);
  }
  r.flows.assign(s.flows.begin() + static_cast<std::ptrdiff_t>(first_flow), s.flows.end());
  return r;
}

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "time,variant,from,to,bytes\n";
  for (const auto& r : trace) {
    out << format_fixed(r.time) << ',' << r.variant << ',' << r.from << ',' << r.to << ','
        << r.bytes << '\n';
  }
}

}  // namespace sensorcdn
