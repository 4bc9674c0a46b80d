#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace sensorcdn;
using namespace sensorcdn::testing;

TEST(Metrics, RecordFlowsAccumulatesPerDirectedLink) {
  const auto t = line5();
  LinkCounters c;
  record_flows(c, t, {{0, 1, TrafficClass::http, 10}, {0, 1, TrafficClass::http, 5}, {1, 0, TrafficClass::signaling, 3}});
  EXPECT_EQ((c[{0, 1}].http), 15u);
  EXPECT_EQ((c[{1, 0}].signaling), 3u);
  EXPECT_EQ(totals(c).http, 15u);
  EXPECT_THROW(record_flows(c, t, {{0, 4, TrafficClass::http, 1}}), AccountingError);
  // a rejected batch records nothing
  EXPECT_EQ(totals(c).http, 15u);
}

TEST(Metrics, AggregateMatchesNaiveSum) {
  std::mt19937_64 rng(2);
  std::vector<LinkFlow> flows;
  for (int i = 0; i < 500; ++i)
    flows.push_back({static_cast<NodeId>(rng() % 4), static_cast<NodeId>(rng() % 4),
                     static_cast<TrafficClass>(rng() % 3), rng() % 1000});
  const auto agg = aggregate(flows);
  for (auto cls : {TrafficClass::http, TrafficClass::signaling, TrafficClass::bundle})
    EXPECT_EQ(byte_hops(agg, cls), byte_hops(flows, cls));
  for (std::size_t i = 1; i < agg.size(); ++i)
    EXPECT_TRUE(std::tie(agg[i - 1].from, agg[i - 1].to, agg[i - 1].cls) < std::tie(agg[i].from, agg[i].to, agg[i].cls));
}

namespace {

RunReport fake_report(std::vector<std::pair<Bytes, Bytes>> per_request) {
  RunReport r;
  std::size_t i = 0;
  for (auto [http, sig] : per_request) {
    RequestOutcome o;
    o.index = i++;
    o.client = 4;
    o.query = Query::all(0, 360);
    o.timing = {0.5, 1.5, 0.01, 2.0};
    o.flows = {{0, 1, TrafficClass::http, http}, {0, 1, TrafficClass::signaling, sig}};
    r.outcomes.push_back(o);
  }
  return r;
}

}  // namespace

TEST(Metrics, CumulativeTrafficAndReduction) {
  const auto legacy = fake_report({{100, 0}, {100, 0}, {100, 0}});
  const auto prog = fake_report({{100, 5}, {20, 5}, {20, 5}});
  EXPECT_EQ(cumulative_traffic(legacy, 2, TrafficClass::http), 200u);
  EXPECT_EQ(cumulative_traffic(prog, 3, {TrafficClass::http, TrafficClass::signaling}), 155u);
  EXPECT_THROW(cumulative_traffic(prog, 4, TrafficClass::http), Error);
  EXPECT_NEAR(traffic_reduction(legacy, prog), 1.0 - 140.0 / 300.0, 1e-12);
  const auto series = cumulative_series(prog);
  ASSERT_EQ(series.size(), 4u);
  EXPECT_EQ(series.front().bytes.http, 0u);
  EXPECT_EQ(series.back().bytes.signaling, 15u);
}

TEST(Metrics, DecompositionMean) {
  const auto r = fake_report({{1, 0}, {1, 0}});
  const auto m = average_decomposition(r);
  EXPECT_DOUBLE_EQ(m.total(), 4.01);
  EXPECT_THROW(average_decomposition(RunReport{}), Error);
}

TEST(Metrics, ShapeMismatchRejected) {
  auto a = fake_report({{1, 0}, {1, 0}});
  auto b = fake_report({{1, 0}});
  EXPECT_THROW(traffic_reduction(a, b), Error);
  b = fake_report({{1, 0}, {1, 0}});
  b.outcomes[1].client = 5;
  EXPECT_THROW(require_same_shape(a, b), Error);
}

TEST(Metrics, ReportJsonRoundTrip) {
  auto cfg = small_config(30);
  cfg.schedule.requests = 5;
  const auto r = run_scenario(cfg);
  const auto back = report_from_json(nlohmann::json::parse(report_text(r)));
  ASSERT_EQ(back.outcomes.size(), r.outcomes.size());
  for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
    EXPECT_EQ(back.outcomes[i].flows, r.outcomes[i].flows);
    EXPECT_EQ(back.outcomes[i].query, r.outcomes[i].query);
    EXPECT_EQ(back.outcomes[i].served.digest, r.outcomes[i].served.digest);
    EXPECT_DOUBLE_EQ(back.outcomes[i].timing.total(), r.outcomes[i].timing.total());
  }
  EXPECT_EQ(back.links.size(), r.links.size());
  EXPECT_EQ(report_text(back).size() > 0, true);
}

TEST(Metrics, CsvShapes) {
  const auto r = fake_report({{100, 5}, {20, 5}});
  std::ostringstream d, t;
  write_downloads_csv(d, r);
  write_traffic_csv(t, r);
  std::istringstream ds(d.str()), ts(t.str());
  std::string line;
  std::vector<std::string> dl, tl;
  while (std::getline(ds, line)) dl.push_back(line);
  while (std::getline(ts, line)) tl.push_back(line);
  ASSERT_EQ(dl.size(), 3u);
  ASSERT_EQ(tl.size(), 4u);
  EXPECT_EQ(tl[1], "0,legacy,0,0,0,0");
  EXPECT_EQ(tl[3], "2,legacy,120,10,0,130");
  EXPECT_NE(dl[1].find(",4.010000000,100,5,0"), std::string::npos) << dl[1];
}
