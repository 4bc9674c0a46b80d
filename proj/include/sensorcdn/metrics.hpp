#pragma once

#include <algorithm>
#include <initializer_list>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sensorcdn/common.hpp"
#include "sensorcdn/delivery.hpp"
#include "sensorcdn/flow.hpp"
#include "sensorcdn/topology.hpp"

namespace sensorcdn {

using ordered_json = nlohmann::ordered_json;

struct ClassBytes {
  Bytes http = 0;
  Bytes signaling = 0;
  Bytes bundle = 0;

  Bytes& operator[](TrafficClass c) {
    return c == TrafficClass::http ? http : c == TrafficClass::signaling ? signaling : bundle;
  }
  Bytes operator[](TrafficClass c) const {
    return c == TrafficClass::http ? http : c == TrafficClass::signaling ? signaling : bundle;
  }
  bool operator==(const ClassBytes&) const = default;
};

/// Cumulative bytes per directed link and class.
using LinkCounters = std::map<std::pair<NodeId, NodeId>, ClassBytes>;

inline void record_flows(LinkCounters& counters, const Topology& t,
                         const std::vector<LinkFlow>& flows) {
  for (const auto& f : flows) {
    if (!t.find_link(f.from, f.to)) {
      throw AccountingError("flow over unknown link " + std::to_string(f.from) + "->" +
                            std::to_string(f.to));
    }
  }
  for (const auto& f : flows) counters[{f.from, f.to}][f.cls] += f.bytes;
}

inline ClassBytes totals(const LinkCounters& counters) {
  ClassBytes sum;
  for (const auto& [k, c] : counters) {
    sum.http += c.http;
    sum.signaling += c.signaling;
    sum.bundle += c.bundle;
  }
  return sum;
}

struct RunReport {
  ordered_json config;
  std::vector<RequestOutcome> outcomes;
  LinkCounters links;
  ordered_json caches = ordered_json::array();
  std::vector<std::string> warnings;
  std::vector<TraceRecord> trace;
};

/// Byte-hops of requests [0, k) over the selected classes.
inline Bytes cumulative_traffic(const RunReport& r, std::size_t k,
                                std::initializer_list<TrafficClass> classes) {
  if (k > r.outcomes.size()) {
    throw Error("request index " + std::to_string(k) + " beyond " +
                std::to_string(r.outcomes.size()) + " requests");
  }
  Bytes total = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (TrafficClass c : classes) total += r.outcomes[i].bytes(c);
  return total;
}

inline Bytes cumulative_traffic(const RunReport& r, std::size_t k, TrafficClass c) {
  return cumulative_traffic(r, k, {c});
}

struct CumulativePoint {
  std::size_t requests = 0;
  ClassBytes bytes;
};

inline std::vector<CumulativePoint> cumulative_series(const RunReport& r) {
  std::vector<CumulativePoint> out{{0, {}}};
  ClassBytes acc;
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    for (TrafficClass c : {TrafficClass::http, TrafficClass::signaling, TrafficClass::bundle})
      acc[c] += r.outcomes[i].bytes(c);
    out.push_back({i + 1, acc});
  }
  return out;
}

inline std::vector<Seconds> download_times(const RunReport& r) {
  std::vector<Seconds> out;
  out.reserve(r.outcomes.size());
  for (const auto& o : r.outcomes) out.push_back(o.timing.total());
  return out;
}

inline TimingBreakdown average_decomposition(const RunReport& r) {
  if (r.outcomes.empty()) throw Error("cannot average an empty report");
  TimingBreakdown m;
  for (const auto& o : r.outcomes) {
    m.t_creation += o.timing.t_creation;
    m.t_signaling += o.timing.t_signaling;
    m.t_processing += o.timing.t_processing;
    m.t_http += o.timing.t_http;
  }
  const double n = static_cast<double>(r.outcomes.size());
  m.t_creation /= n;
  m.t_signaling /= n;
  m.t_processing /= n;
  m.t_http /= n;
  return m;
}

/// Throws when the two runs did not replay the same request sequence.
inline void require_same_shape(const RunReport& a, const RunReport& b) {
  if (a.outcomes.size() != b.outcomes.size()) {
    throw Error("reports differ in request count: " + std::to_string(a.outcomes.size()) +
                " vs " + std::to_string(b.outcomes.size()));
  }
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    if (a.outcomes[i].client != b.outcomes[i].client || !(a.outcomes[i].query == b.outcomes[i].query)) {
      throw Error("reports differ at request " + std::to_string(i));
    }
  }
}

/// 1 - programmable / legacy HTTP byte-hops.
inline double traffic_reduction(const RunReport& legacy, const RunReport& programmable) {
  require_same_shape(legacy, programmable);
  const auto n = legacy.outcomes.size();
  const double base = static_cast<double>(cumulative_traffic(legacy, n, TrafficClass::http));
  if (base == 0) return 0;
  return 1.0 - static_cast<double>(cumulative_traffic(programmable, n, TrafficClass::http)) / base;
}

// JSON ------------------------------------------------------------------------

inline ordered_json to_json(const Query& q) {
  ordered_json j;
  j["sensors"] = q.sensors ? ordered_json(*q.sensors) : ordered_json("all");
  j["t_start"] = q.t_start;
  j["t_end"] = q.t_end;
  j["type"] = q.type_tag;
  return j;
}

inline Query query_from_json(const nlohmann::json& j) {
  Query q;
  if (j.at("sensors").is_string()) {
    if (j.at("sensors").get<std::string>() != "all") throw ConfigError("query sensors must be \"all\" or an id list");
  } else {
    q.sensors = j.at("sensors").get<std::vector<SensorId>>();
    std::sort(q.sensors->begin(), q.sensors->end());
  }
  q.t_start = j.at("t_start").get<double>();
  q.t_end = j.at("t_end").get<double>();
  q.type_tag = j.value("type", std::string("sensor"));
  return q;
}

inline ordered_json to_json(const TimingBreakdown& t) {
  return {{"creation", t.t_creation},
          {"signaling", t.t_signaling},
          {"processing", t.t_processing},
          {"http", t.t_http},
          {"total", t.total()}};
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline ordered_json to_json(const RequestOutcome& o) {
  ordered_json j;
  j["index"] = o.index;
  j["client"] = o.client;
  j["mode"] = to_string(o.mode);
  j["start"] = o.start;
  j["end"] = o.end();
  j["timing"] = to_json(o.timing);
  j["query"] = to_json(o.query);
  j["served"] = {{"entries", o.served.entries},
                 {"bytes", o.served.bytes},
                 {"digest", hex64(o.served.digest)}};
  j["signaled"] = o.signaled;
  j["preceded_by_remove"] = o.preceded_by_remove;
  j["chain"] = o.chain;
  j["redirect_target"] = o.redirect_target;
  auto sources = ordered_json::array();
  for (const auto& s : o.sources)
    sources.push_back({{"node", s.node}, {"entries", s.entries}, {"bytes", s.bytes}});
  j["sources"] = std::move(sources);
  j["bytes"] = {{"http", o.bytes(TrafficClass::http)},
                {"signaling", o.bytes(TrafficClass::signaling)},
                {"bundle", o.bytes(TrafficClass::bundle)}};
  auto flows = ordered_json::array();
  for (const auto& f : o.flows)
    flows.push_back({{"from", f.from}, {"to", f.to}, {"class", to_string(f.cls)}, {"bytes", f.bytes}});
  j["flows"] = std::move(flows);
  return j;
}

inline RequestOutcome outcome_from_json(const nlohmann::json& j) {
  RequestOutcome o;
  o.index = j.at("index").get<std::size_t>();
  o.client = j.at("client").get<NodeId>();
  auto mode = parse_mode(j.at("mode").get<std::string>());
  if (!mode) throw ConfigError("unknown mode in report");
  o.mode = *mode;
  o.start = j.at("start").get<double>();
  const auto& t = j.at("timing");
  o.timing = {t.at("creation").get<double>(), t.at("signaling").get<double>(),
              t.at("processing").get<double>(), t.at("http").get<double>()};
  o.query = query_from_json(j.at("query"));
  const auto& s = j.at("served");
  o.served.entries = s.at("entries").get<std::size_t>();
  o.served.bytes = s.at("bytes").get<Bytes>();
  o.served.digest = std::stoull(s.at("digest").get<std::string>(), nullptr, 16);
  o.signaled = j.at("signaled").get<bool>();
  o.preceded_by_remove = j.value("preceded_by_remove", false);
  o.chain = j.at("chain").get<std::vector<NodeId>>();
  o.redirect_target = j.at("redirect_target").get<NodeId>();
  for (const auto& src : j.at("sources"))
    o.sources.push_back({src.at("node").get<NodeId>(), src.at("entries").get<std::size_t>(),
                         src.at("bytes").get<Bytes>()});
  for (const auto& f : j.at("flows")) {
    auto cls = parse_traffic_class(f.at("class").get<std::string>());
    if (!cls) throw ConfigError("unknown traffic class in report");
    o.flows.push_back({f.at("from").get<NodeId>(), f.at("to").get<NodeId>(), *cls,
                       f.at("bytes").get<Bytes>()});
  }
  return o;
}

inline ordered_json series_json(const RunReport& r) {
  ordered_json j;
  auto cum = ordered_json::array();
  for (const auto& p : cumulative_series(r)) {
    cum.push_back({{"requests", p.requests},
                   {"http", p.bytes.http},
                   {"signaling", p.bytes.signaling},
                   {"bundle", p.bytes.bundle},
                   {"total", p.bytes.http + p.bytes.signaling}});
  }
  j["cumulative"] = std::move(cum);
  j["download_times"] = download_times(r);
  j["mean_decomposition"] =
      r.outcomes.empty() ? ordered_json() : to_json(average_decomposition(r));
  return j;
}

inline ordered_json to_json(const RunReport& r) {
  ordered_json j;
  j["config"] = r.config;
  const auto sum = totals(r.links);
  j["summary"] = {{"requests", r.outcomes.size()},
                  {"http_byte_hops", sum.http},
                  {"signaling_byte_hops", sum.signaling},
                  {"bundle_byte_hops", sum.bundle}};
  auto outcomes = ordered_json::array();
  for (const auto& o : r.outcomes) outcomes.push_back(to_json(o));
  j["outcomes"] = std::move(outcomes);
  auto links = ordered_json::array();
  for (const auto& [k, c] : r.links) {
    links.push_back({{"from", k.first},
                     {"to", k.second},
                     {"http", c.http},
                     {"signaling", c.signaling},
                     {"bundle", c.bundle}});
  }
  j["links"] = std::move(links);
  j["series"] = series_json(r);
  j["caches"] = r.caches;
  j["warnings"] = r.warnings;
  return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.config = j.at("config");
  for (const auto& o : j.at("outcomes")) r.outcomes.push_back(outcome_from_json(o));
  for (const auto& l : j.at("links")) {
    r.links[{l.at("from").get<NodeId>(), l.at("to").get<NodeId>()}] = {
        l.at("http").get<Bytes>(), l.at("signaling").get<Bytes>(), l.at("bundle").get<Bytes>()};
  }
  r.caches = j.value("caches", ordered_json::array());
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

// CSV -------------------------------------------------------------------------

inline void write_downloads_csv(std::ostream& out, const RunReport& r) {
  out << "request,client,mode,t_creation,t_signaling,t_processing,t_http,total,"
         "http_bytes,signaling_bytes,bundle_bytes\n";
  for (const auto& o : r.outcomes) {
    out << o.index + 1 << ',' << o.client << ',' << to_string(o.mode) << ','
        << format_fixed(o.timing.t_creation) << ',' << format_fixed(o.timing.t_signaling) << ','
        << format_fixed(o.timing.t_processing) << ',' << format_fixed(o.timing.t_http) << ','
        << format_fixed(o.timing.total()) << ',' << o.bytes(TrafficClass::http) << ','
        << o.bytes(TrafficClass::signaling) << ',' << o.bytes(TrafficClass::bundle) << '\n';
  }
}

/// Cumulative byte-hops after each request; total = http + signaling.
inline void write_traffic_csv(std::ostream& out, const RunReport& r) {
  const std::string mode =
      r.outcomes.empty() ? std::string(r.config.value("mode", "")) : std::string(to_string(r.outcomes.front().mode));
  out << "requests,mode,http_bytes,signaling_bytes,bundle_bytes,total_bytes\n";
  for (const auto& p : cumulative_series(r)) {
    out << p.requests << ',' << mode << ',' << p.bytes.http << ',' << p.bytes.signaling << ','
        << p.bytes.bundle << ',' << p.bytes.http + p.bytes.signaling << '\n';
  }
}

}  // namespace sensorcdn
