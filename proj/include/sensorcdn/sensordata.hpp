#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sensorcdn/common.hpp"

namespace sensorcdn {

inline constexpr std::uint32_t kDefaultEntryBytes = 180;

struct Position {
  double x = 0;
  double y = 0;
  bool operator==(const Position&) const = default;
};

struct SensorReading {
  SensorId sensor_id = 0;
  Seconds timestamp = 0;
  Position position;
  double value = 0;
  std::uint32_t wire_size = kDefaultEntryBytes;

  bool same_key(const SensorReading& o) const {
    return sensor_id == o.sensor_id && timestamp == o.timestamp;
  }
  bool operator==(const SensorReading&) const = default;
};

inline bool key_less(const SensorReading& a, const SensorReading& b) {
  return a.sensor_id != b.sensor_id ? a.sensor_id < b.sensor_id : a.timestamp < b.timestamp;
}

/// Sensor selection of a query; nullopt selects every sensor.
using SensorFilter = std::optional<std::vector<SensorId>>;

/// Half-open window [t_start, t_end) over a sensor selection.
struct Query {
  SensorFilter sensors;
  Seconds t_start = 0;
  Seconds t_end = 0;
  std::string type_tag = "sensor";

  static Query all(Seconds t_start, Seconds t_end, std::string tag = "sensor") {
    Query q{std::nullopt, t_start, t_end, std::move(tag)};
    q.validate();
    return q;
  }
  static Query of(std::vector<SensorId> ids, Seconds t_start, Seconds t_end,
                  std::string tag = "sensor") {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    Query q{std::move(ids), t_start, t_end, std::move(tag)};
    q.validate();
    return q;
  }

  void validate() const {
    if (!(t_start < t_end)) {
      throw QueryError("query window [" + format_fixed(t_start, 3) + ", " +
                       format_fixed(t_end, 3) + ") is empty");
    }
  }

  bool selects(SensorId s) const {
    return !sensors || std::binary_search(sensors->begin(), sensors->end(), s);
  }
  bool in_window(Seconds t) const { return t >= t_start && t < t_end; }
  bool matches(const SensorReading& r) const {
    return selects(r.sensor_id) && in_window(r.timestamp);
  }

  bool operator==(const Query&) const = default;
  auto operator<=>(const Query&) const = default;
};

/// Query-scoped bundle of readings, sorted and duplicate-free on
/// (sensor_id, timestamp).
class DataPackage {
 public:
  DataPackage() = default;

  /// Sorts and deduplicates; identical keys with different payloads are a
  /// data-integrity error.
  static DataPackage from_entries(std::vector<SensorReading> entries, Bytes envelope = 0) {
    std::sort(entries.begin(), entries.end(), key_less);
    std::vector<SensorReading> out;
    out.reserve(entries.size());
    for (auto& r : entries) {
      if (!out.empty() && out.back().same_key(r)) {
        if (!(out.back() == r)) throw conflict(r);
        continue;
      }
      out.push_back(std::move(r));
    }
    DataPackage p;
    p.entries_ = std::move(out);
    p.envelope_ = envelope;
    return p;
  }

  const std::vector<SensorReading>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  Bytes envelope_bytes() const { return envelope_; }

  Bytes byte_size() const {
    if (entries_.empty()) return 0;
    Bytes total = envelope_;
    for (const auto& r : entries_) total += r.wire_size;
    return total;
  }

  bool operator==(const DataPackage&) const = default;

  static DataIntegrityError conflict(const SensorReading& r) {
    return DataIntegrityError("conflicting values for sensor " + std::to_string(r.sensor_id) +
                              " at t=" + format_fixed(r.timestamp, 6));
  }

 private:
  friend DataPackage package_union(const DataPackage&, const DataPackage&);
  std::vector<SensorReading> entries_;
  Bytes envelope_ = 0;
};

/// Sorted duplicate-free union. Conflicting payloads at one key throw.
inline DataPackage package_union(const DataPackage& a, const DataPackage& b) {
  DataPackage out;
  out.envelope_ = std::max(a.envelope_, b.envelope_);
  out.entries_.reserve(a.size() + b.size());
  auto ia = a.entries_.begin();
  auto ib = b.entries_.begin();
  while (ia != a.entries_.end() || ib != b.entries_.end()) {
    if (ib == b.entries_.end() || (ia != a.entries_.end() && key_less(*ia, *ib))) {
      out.entries_.push_back(*ia++);
    } else if (ia == a.entries_.end() || key_less(*ib, *ia)) {
      out.entries_.push_back(*ib++);
    } else {
      if (!(*ia == *ib)) throw DataPackage::conflict(*ia);
      out.entries_.push_back(*ia++);
      ++ib;
    }
  }
  return out;
}

/// FNV-1a over entry keys and payloads; stable across platforms.
inline std::uint64_t content_digest(const DataPackage& p) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& r : p.entries()) {
    mix(r.sensor_id);
    mix(std::bit_cast<std::uint64_t>(r.timestamp));
    mix(std::bit_cast<std::uint64_t>(r.position.x));
    mix(std::bit_cast<std::uint64_t>(r.position.y));
    mix(std::bit_cast<std::uint64_t>(r.value));
    mix(r.wire_size);
  }
  return h;
}

/// Periodic sampling schedule of every sensor: sensor s reports at
/// phase[s] + k * period for k in [0, count).
struct SamplingGrid {
  Seconds period = 15;
  std::size_t count = 0;
  std::vector<Seconds> phase;

  std::size_t sensors() const { return phase.size(); }

  Seconds at(SensorId s, std::size_t k) const {
    return phase[s] + static_cast<double>(k) * period;
  }

  /// Index range [first, last) of grid points inside [lo, hi).
  std::pair<std::size_t, std::size_t> points_in(SensorId s, Seconds lo, Seconds hi) const {
    if (s >= phase.size() || count == 0) return {0, 0};
    auto first_at_or_after = [&](Seconds t) -> std::size_t {
      if (t <= phase[s]) return 0;
      auto k = static_cast<std::size_t>(std::ceil((t - phase[s]) / period));
      // settle rounding so that at(k-1) < t <= at(k)
      while (k > 0 && at(s, k - 1) >= t) --k;
      while (k < count && at(s, k) < t) ++k;
      return std::min(k, count);
    };
    std::size_t a = first_at_or_after(lo);
    std::size_t b = first_at_or_after(hi);
    return {a, std::max(a, b)};
  }
};

inline SamplingGrid make_grid(std::size_t n_sensors, double updates_per_minute, Seconds duration,
                              std::uint64_t seed) {
  if (!(updates_per_minute > 0)) throw QueryError("sampling rate must be positive");
  if (!(duration >= 0)) throw QueryError("duration must be non-negative");
  SamplingGrid g;
  g.period = 60.0 / updates_per_minute;
  g.count = static_cast<std::size_t>(std::floor(duration * updates_per_minute / 60.0 + 1e-9));
  std::mt19937_64 rng(seed);
  g.phase.reserve(n_sensors);
  for (std::size_t s = 0; s < n_sensors; ++s) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    g.phase.push_back(u * g.period);
  }
  return g;
}

/// Synthetic readings on the seeded grid, in (timestamp, sensor_id) order.
inline std::vector<SensorReading> generate_readings(const SamplingGrid& grid, std::uint64_t seed,
                                                    std::uint32_t wire_size = kDefaultEntryBytes) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<SensorReading> out;
  out.reserve(grid.sensors() * grid.count);
  for (SensorId s = 0; s < grid.sensors(); ++s) {
    const Position pos{unit() * 1000.0, unit() * 1000.0};
    for (std::size_t k = 0; k < grid.count; ++k) {
      out.push_back({s, grid.at(s, k), pos, unit() * 100.0, wire_size});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.sensor_id < b.sensor_id;
  });
  return out;
}

inline std::vector<SensorReading> generate_readings(std::size_t n_sensors,
                                                    double updates_per_minute, Seconds duration,
                                                    std::uint64_t seed) {
  return generate_readings(make_grid(n_sensors, updates_per_minute, duration, seed), seed);
}

/// Gateway datastore: per-sensor, time-ordered, append-only.
class ReadingStore {
 public:
  /// Appends. Rejects a reading older than the sensor's last one, and any
  /// reading that would land in an already-closed interval.
  void ingest(const SensorReading& r) {
    auto& seq = per_sensor_[r.sensor_id];
    if (!seq.empty() && !(r.timestamp > seq.back().timestamp)) {
      throw OrderingError("out-of-order reading for sensor " + std::to_string(r.sensor_id) +
                          ": t=" + format_fixed(r.timestamp, 6) + " after t=" +
                          format_fixed(seq.back().timestamp, 6));
    }
    if (r.timestamp < clock_) {
      throw OrderingError("late reading for sensor " + std::to_string(r.sensor_id) +
                          ": t=" + format_fixed(r.timestamp, 6) + " precedes store clock " +
                          format_fixed(clock_, 6));
    }
    seq.push_back(r);
    clock_ = std::max(clock_, r.timestamp);
    ++size_;
  }

  void advance_to(Seconds now) { clock_ = std::max(clock_, now); }
  Seconds clock() const { return clock_; }
  std::size_t size() const { return size_; }

  std::size_t count(SensorId s) const {
    auto it = per_sensor_.find(s);
    return it == per_sensor_.end() ? 0 : it->second.size();
  }

  const std::map<SensorId, std::vector<SensorReading>>& sensors() const { return per_sensor_; }

  /// Readings matching q, in (sensor_id, timestamp) order.
  std::vector<SensorReading> select(const Query& q) const {
    std::vector<SensorReading> out;
    auto take = [&](const std::vector<SensorReading>& seq) {
      auto lo = std::lower_bound(seq.begin(), seq.end(), q.t_start,
                                 [](const SensorReading& r, Seconds t) { return r.timestamp < t; });
      for (; lo != seq.end() && lo->timestamp < q.t_end; ++lo) out.push_back(*lo);
    };
    if (q.sensors) {
      for (SensorId s : *q.sensors) {
        if (auto it = per_sensor_.find(s); it != per_sensor_.end()) take(it->second);
      }
    } else {
      for (const auto& [s, seq] : per_sensor_) take(seq);
    }
    return out;
  }

 private:
  std::map<SensorId, std::vector<SensorReading>> per_sensor_;
  Seconds clock_ = 0;
  std::size_t size_ = 0;
};

struct PackageCost {
  /// Seconds spent per extracted entry.
  double k_create = 23.3e-6;
  Bytes envelope_bytes = 0;
};

struct BuiltPackage {
  DataPackage package;
  Seconds creation_time = 0;
};

/// Extracts the readings matching a closed-window query.
inline BuiltPackage build_package(const ReadingStore& store, const Query& q,
                                  const PackageCost& cost = {}) {
  q.validate();
  if (q.t_end > store.clock()) {
    throw QueryError("query window ends at " + format_fixed(q.t_end, 6) +
                     " after the store clock " + format_fixed(store.clock(), 6) +
                     "; only closed windows can be served");
  }
  auto entries = store.select(q);
  const double n = static_cast<double>(entries.size());
  // select() already yields sorted unique keys
  return {DataPackage::from_entries(std::move(entries), cost.envelope_bytes), cost.k_create * n};
}

// JSON forms ------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const SensorReading& r) {
  return {{"sensor", r.sensor_id},
          {"t", r.timestamp},
          {"x", r.position.x},
          {"y", r.position.y},
          {"value", r.value},
          {"size", r.wire_size}};
}

inline SensorReading reading_from_json(const nlohmann::json& j) {
  SensorReading r;
  r.sensor_id = j.at("sensor").get<SensorId>();
  r.timestamp = j.at("t").get<double>();
  r.position = {j.at("x").get<double>(), j.at("y").get<double>()};
  r.value = j.at("value").get<double>();
  r.wire_size = j.value("size", kDefaultEntryBytes);
  return r;
}

/// One JSON object per line.
inline void dump_readings(std::ostream& out, const std::vector<SensorReading>& readings) {
  for (const auto& r : readings) out << to_json(r).dump() << '\n';
}

inline std::vector<SensorReading> restore_readings(std::istream& in) {
  std::vector<SensorReading> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(reading_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("reading dump line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const DataPackage& p) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : p.entries()) arr.push_back(to_json(r));
  return arr;
}

}  // namespace sensorcdn
