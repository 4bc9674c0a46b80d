#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sensorcdn/common.hpp"
#include "sensorcdn/sensordata.hpp"
#include "sensorcdn/topology.hpp"

namespace sensorcdn {

inline const std::string kSensorCdnBundle = "sensor_cdn";

enum class CacheState { live, expired };

/// An installed on-path cache: per-sensor entry index plus soft state.
struct CacheInstance {
  NodeId node = 0;
  std::string bundle = kSensorCdnBundle;
  Seconds install_time = 0;
  Seconds ttl = 0;
  std::optional<NodeId> upstream;
  std::map<SensorId, std::vector<SensorReading>> index;
  std::uint64_t hit_count = 0;
  std::uint64_t miss_count = 0;

  Seconds deadline() const { return install_time + ttl; }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& [s, v] : index) n += v.size();
    return n;
  }

  bool holds(SensorId s, Seconds t) const {
    auto it = index.find(s);
    if (it == index.end()) return false;
    auto pos = std::lower_bound(it->second.begin(), it->second.end(), t,
                                [](const SensorReading& r, Seconds v) { return r.timestamp < v; });
    return pos != it->second.end() && pos->timestamp == t;
  }
};

/// Expiry is inclusive at the deadline.
inline CacheState expire_check(const CacheInstance& c, Seconds now) {
  return now >= c.deadline() ? CacheState::expired : CacheState::live;
}

struct LookupResult {
  std::vector<SensorReading> hits;
  /// Per-sensor missing windows, grouped by identical window.
  std::vector<Query> residual;
};

namespace detail {

inline std::vector<SensorReading> cached_matches(const CacheInstance& c, const Query& q) {
  std::vector<SensorReading> out;
  auto take = [&](const std::vector<SensorReading>& seq) {
    auto lo = std::lower_bound(seq.begin(), seq.end(), q.t_start,
                               [](const SensorReading& r, Seconds t) { return r.timestamp < t; });
    for (; lo != seq.end() && lo->timestamp < q.t_end; ++lo) out.push_back(*lo);
  };
  if (q.sensors) {
    for (SensorId s : *q.sensors)
      if (auto it = c.index.find(s); it != c.index.end()) take(it->second);
  } else {
    for (const auto& [s, seq] : c.index) take(seq);
  }
  return out;
}

inline std::vector<Query> missing_windows(const CacheInstance& c, const Query& q,
                                          const SamplingGrid& grid) {
  std::map<std::pair<Seconds, Seconds>, std::vector<SensorId>> grouped;
  auto scan = [&](SensorId s) {
    auto [first, last] = grid.points_in(s, q.t_start, q.t_end);
    std::size_t k = first;
    while (k < last) {
      if (c.holds(s, grid.at(s, k))) {
        ++k;
        continue;
      }
      std::size_t run_end = k;
      while (run_end + 1 < last && !c.holds(s, grid.at(s, run_end + 1))) ++run_end;
      const Seconds lo = grid.at(s, k);
      const Seconds hi = run_end + 1 < grid.count ? grid.at(s, run_end + 1)
                                                  : grid.at(s, run_end) + grid.period;
      grouped[{lo, std::min(hi, q.t_end)}].push_back(s);
      k = run_end + 1;
    }
  };
  if (q.sensors) {
    for (SensorId s : *q.sensors) scan(s);
  } else {
    for (SensorId s = 0; s < grid.sensors(); ++s) scan(s);
  }
  std::vector<Query> out;
  out.reserve(grouped.size());
  for (auto& [w, ids] : grouped) out.push_back(Query::of(std::move(ids), w.first, w.second, q.type_tag));
  return out;
}

}  // namespace detail

/// Cached entries matching q plus the minimal residual still to fetch
/// upstream. Expired or cold caches answer with residual = [q].
inline LookupResult lookup(CacheInstance& c, const Query& q, const SamplingGrid& grid,
                           Seconds now) {
  LookupResult r;
  if (expire_check(c, now) == CacheState::expired) {
    r.residual.push_back(q);
    ++c.miss_count;
    return r;
  }
  r.hits = detail::cached_matches(c, q);
  if (r.hits.empty()) {
    r.residual.push_back(q);
  } else {
    r.residual = detail::missing_windows(c, q, grid);
  }
  if (r.residual.empty()) {
    ++c.hit_count;
  } else {
    ++c.miss_count;
  }
  return r;
}

/// True when a live cache can answer q without going upstream.
inline bool covers(const CacheInstance& c, const Query& q, const SamplingGrid& grid,
                   Seconds now) {
  if (expire_check(c, now) == CacheState::expired) return false;
  return detail::missing_windows(c, q, grid).empty();
}

/// Merges a package into the index. Same-key entries must agree.
inline void store_entries(CacheInstance& c, const DataPackage& p, Seconds now) {
  if (expire_check(c, now) == CacheState::expired) {
    throw ExpiredError("cache on node " + std::to_string(c.node) + " expired at " +
                       format_fixed(c.deadline(), 6));
  }
  const auto& e = p.entries();
  // Validate first so a conflict leaves the index untouched.
  for (const auto& r : e) {
    auto it = c.index.find(r.sensor_id);
    if (it == c.index.end()) continue;
    auto pos = std::lower_bound(it->second.begin(), it->second.end(), r, key_less);
    if (pos != it->second.end() && pos->same_key(r) && !(*pos == r)) {
      throw DataPackage::conflict(r);
    }
  }
  for (std::size_t i = 0; i < e.size();) {
    std::size_t j = i;
    while (j < e.size() && e[j].sensor_id == e[i].sensor_id) ++j;
    auto& seq = c.index[e[i].sensor_id];
    std::vector<SensorReading> merged;
    merged.reserve(seq.size() + (j - i));
    std::set_union(seq.begin(), seq.end(), e.begin() + static_cast<std::ptrdiff_t>(i),
                   e.begin() + static_cast<std::ptrdiff_t>(j), std::back_inserter(merged),
                   key_less);
    seq = std::move(merged);
    i = j;
  }
}

/// All cache instances of one simulation run, keyed by (node, bundle).
class CacheRegistry {
 public:
  explicit CacheRegistry(const Topology& topo) : topo_(&topo) {}

  /// Installs, or refreshes a live instance keeping its entries. An expired
  /// instance is replaced by an empty one.
  CacheInstance& install(NodeId node, const std::string& bundle, Seconds ttl, Seconds now,
                         bool* fresh = nullptr) {
    if (!(ttl > 0)) throw ProtocolError("ttl must be positive");
    const auto& spec = topo_->node(node);
    if (!spec.programmable) {
      throw CapabilityError("node " + std::to_string(node) +
                            " is not programmable; cannot install " + bundle);
    }
    auto key = std::pair{node, bundle};
    auto it = caches_.find(key);
    bool created = false;
    if (it == caches_.end() || expire_check(it->second, now) == CacheState::expired) {
      CacheInstance c;
      c.node = node;
      c.bundle = bundle;
      caches_[key] = std::move(c);
      it = caches_.find(key);
      created = true;
    }
    it->second.install_time = now;
    it->second.ttl = ttl;
    if (fresh) *fresh = created;
    return it->second;
  }

  /// Any instance, live or expired.
  CacheInstance* find(NodeId node, const std::string& bundle = kSensorCdnBundle) {
    auto it = caches_.find({node, bundle});
    return it == caches_.end() ? nullptr : &it->second;
  }
  const CacheInstance* find(NodeId node, const std::string& bundle = kSensorCdnBundle) const {
    auto it = caches_.find({node, bundle});
    return it == caches_.end() ? nullptr : &it->second;
  }

  CacheInstance* find_live(NodeId node, Seconds now,
                           const std::string& bundle = kSensorCdnBundle) {
    auto* c = find(node, bundle);
    return c && expire_check(*c, now) == CacheState::live ? c : nullptr;
  }

  /// Discards the instance and its entries. Unknown instances only warn.
  bool uninstall(NodeId node, const std::string& bundle = kSensorCdnBundle) {
    if (caches_.erase({node, bundle}) == 0) {
      warnings_.push_back("uninstall of unknown " + bundle + " instance on node " +
                          std::to_string(node));
      return false;
    }
    return true;
  }

  void warn(std::string w) { warnings_.push_back(std::move(w)); }
  const std::vector<std::string>& warnings() const { return warnings_; }

  const std::map<std::pair<NodeId, std::string>, CacheInstance>& instances() const {
    return caches_;
  }

 private:
  const Topology* topo_;
  std::map<std::pair<NodeId, std::string>, CacheInstance> caches_;
  std::vector<std::string> warnings_;
};

/// Node-level summary: entry count, covered time intervals, deadline.
inline nlohmann::ordered_json snapshot(const CacheInstance& c, Seconds period, Seconds now) {
  std::vector<std::pair<Seconds, Seconds>> spans;
  for (const auto& [s, seq] : c.index)
    for (const auto& r : seq) spans.emplace_back(r.timestamp, r.timestamp + period);
  std::sort(spans.begin(), spans.end());
  auto windows = nlohmann::ordered_json::array();
  std::optional<std::pair<Seconds, Seconds>> cur;
  for (const auto& s : spans) {
    if (cur && s.first <= cur->second) {
      cur->second = std::max(cur->second, s.second);
    } else {
      if (cur) windows.push_back({cur->first, cur->second});
      cur = s;
    }
  }
  if (cur) windows.push_back({cur->first, cur->second});

  nlohmann::ordered_json j;
  j["node"] = c.node;
  j["bundle"] = c.bundle;
  j["install_time"] = c.install_time;
  j["deadline"] = c.deadline();
  j["live"] = expire_check(c, now) == CacheState::live;
  j["upstream"] = c.upstream ? nlohmann::ordered_json(*c.upstream) : nlohmann::ordered_json();
  j["entries"] = c.entry_count();
  j["sensors"] = c.index.size();
  j["coverage"] = std::move(windows);
  j["hits"] = c.hit_count;
  j["misses"] = c.miss_count;
  return j;
}

inline nlohmann::ordered_json snapshot(const CacheRegistry& reg, Seconds period, Seconds now) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& [key, c] : reg.instances()) arr.push_back(snapshot(c, period, now));
  return arr;
}

}  // namespace sensorcdn
