#pragma once

#include <map>
#include <optional>
#include <string_view>
#include <tuple>
#include <vector>

#include "sensorcdn/common.hpp"

namespace sensorcdn {

enum class TrafficClass { http, signaling, bundle };

inline std::string_view to_string(TrafficClass c) {
  switch (c) {
    case TrafficClass::http: return "http";
    case TrafficClass::signaling: return "signaling";
    case TrafficClass::bundle: return "bundle";
  }
  return "?";
}

inline std::optional<TrafficClass> parse_traffic_class(std::string_view s) {
  if (s == "http") return TrafficClass::http;
  if (s == "signaling") return TrafficClass::signaling;
  if (s == "bundle") return TrafficClass::bundle;
  return std::nullopt;
}

/// Bytes of one class carried over one directed link traversal.
struct LinkFlow {
  NodeId from = 0;
  NodeId to = 0;
  TrafficClass cls = TrafficClass::http;
  Bytes bytes = 0;

  bool operator==(const LinkFlow&) const = default;
};

/// Byte-hops of a flow list restricted to one class.
inline Bytes byte_hops(const std::vector<LinkFlow>& flows, TrafficClass cls) {
  Bytes total = 0;
  for (const auto& f : flows)
    if (f.cls == cls) total += f.bytes;
  return total;
}

/// Sums flows per (from, to, class), ordered by key.
inline std::vector<LinkFlow> aggregate(const std::vector<LinkFlow>& flows) {
  std::map<std::tuple<NodeId, NodeId, TrafficClass>, Bytes> acc;
  for (const auto& f : flows) acc[{f.from, f.to, f.cls}] += f.bytes;
  std::vector<LinkFlow> out;
  out.reserve(acc.size());
  for (const auto& [k, b] : acc) out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), b});
  return out;
}

}  // namespace sensorcdn
