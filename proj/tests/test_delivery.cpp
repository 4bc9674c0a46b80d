#include <gtest/gtest.h>

#include "support.hpp"

using namespace sensorcdn;
using namespace sensorcdn::testing;

namespace {

struct Fixture {
  Topology topo;
  SamplingGrid grid;
  std::vector<SensorReading> readings;
  ReadingStore store;
  DeliveryState st;

  explicit Fixture(Topology t, std::size_t sensors = 20, ModelParams p = {})
      : topo(std::move(t)),
        grid(make_grid(sensors, 4, 360, 1)),
        readings(generate_readings(grid, 1)),
        store(loaded_store(readings, 360)),
        st(topo, grid, store, p) {}
};

}  // namespace

TEST(Delivery, TransferOracle) {
  const auto t = Topology::build({{0, NodeKind::gateway}, {1, NodeKind::edge}}, {{0, 1, 1e7, 0}});
  const std::vector<NodeId> seg{0, 1};
  EXPECT_NEAR(transfer_time(t, seg, 4'320'000, 0), 3.456, 1e-12);
  EXPECT_NEAR(transfer_time(t, seg, 4'320'000, 0, 0.85), 3.456 / 0.85, 1e-12);
  EXPECT_NEAR(transfer(t, seg, 4'320'000, 0, 1.0, [](NodeId, NodeId) { return std::size_t{2}; }).duration,
              6.912, 1e-12);
}

TEST(Delivery, BottleneckAndLatency) {
  auto t = Topology::build({{0, NodeKind::gateway, false, 5e6}, {1, NodeKind::edge}, {2, NodeKind::edge}},
                           {{0, 1, 1e9, 0.01}, {1, 2, 1e8, 0.02}});
  const std::vector<NodeId> seg{0, 1, 2};
  // serve_rate 5e6 binds below both links
  EXPECT_NEAR(transfer_time(t, seg, 1'000'000, 0), 1.6 + 0.03, 1e-12);
  // serving node 1 is unconstrained: link 1-2 binds
  EXPECT_NEAR(transfer_time(t, std::vector<NodeId>{1, 2}, 1'000'000, 1), 0.08 + 0.02, 1e-12);
  EXPECT_THROW(transfer(t, std::vector<NodeId>{1}, 10, 1, 1.0), ModelError);
  EXPECT_EQ(transfer(t, std::vector<NodeId>{1}, 0, 1, 1.0).duration, 0);
}

TEST(Delivery, LegacyTrafficIsPackageTimesHops) {
  Fixture f(line5());
  const auto q = Query::all(0, 360);
  const auto o = client_request(f.st, 4, q, DeploymentMode::legacy, 360);
  const Bytes pkg = f.readings.size() * 180;
  EXPECT_EQ(o.bytes(TrafficClass::http), pkg * 4);
  EXPECT_EQ(o.bytes(TrafficClass::signaling), 0u);
  EXPECT_FALSE(o.signaled);
  EXPECT_EQ(o.timing.t_signaling, 0);
  EXPECT_NEAR(o.timing.t_creation, 23.3e-6 * static_cast<double>(f.readings.size()), 1e-12);
  EXPECT_EQ(o.package->entries(), oracle_select(f.readings, q));
  // legacy never memoizes
  const auto o2 = client_request(f.st, 4, q, DeploymentMode::legacy, 400);
  EXPECT_EQ(o2.timing.t_creation, o.timing.t_creation);
  EXPECT_TRUE(f.st.caches.instances().empty());
}

TEST(Delivery, WarmEdgeServesWithoutGateway) {
  Fixture f(line5());
  const auto q = Query::all(0, 360);
  const auto first = client_request(f.st, 4, q, DeploymentMode::edge_only, 360);
  EXPECT_EQ(first.chain, (std::vector<NodeId>{1, 3}));
  EXPECT_GT(first.timing.t_creation, 0);
  const auto second = client_request(f.st, 4, q, DeploymentMode::edge_only, first.end());
  EXPECT_EQ(second.timing.t_creation, 0);
  ASSERT_EQ(second.sources.size(), 1u);
  EXPECT_EQ(second.sources.front().node, 3u);
  EXPECT_EQ(second.bytes(TrafficClass::http), first.served.bytes);
  EXPECT_EQ(second.package->entries(), oracle_select(f.readings, q));
  EXPECT_LT(second.timing.total(), first.timing.total());
}

TEST(Delivery, PartialFillPullsOnlyResidual) {
  Fixture f(line5());
  const auto narrow = Query::all(0, 180);
  const auto wide = Query::all(0, 360);
  client_request(f.st, 4, narrow, DeploymentMode::edge_only, 360);
  const auto o = client_request(f.st, 4, wide, DeploymentMode::edge_only, 400);
  EXPECT_EQ(o.package->entries(), oracle_select(f.readings, wide));
  Bytes from_gateway = 0;
  for (const auto& s : o.sources)
    if (s.node == 0) from_gateway = s.bytes;
  const Bytes expect = oracle_select(f.readings, Query::all(180, 360)).size() * 180;
  EXPECT_EQ(from_gateway, expect);
}

TEST(Delivery, StoreAndForwardIsNeverFaster) {
  ModelParams sf;
  sf.forwarding = Forwarding::store_and_forward;
  Fixture a(line5()), b(line5(), 20, sf);
  const auto q = Query::all(0, 360);
  for (auto mode : {DeploymentMode::legacy, DeploymentMode::edge_only}) {
    const auto pa = client_request(a.st, 4, q, mode, 360);
    const auto pb = client_request(b.st, 4, q, mode, 360);
    EXPECT_GE(pb.timing.t_http, pa.timing.t_http);
    EXPECT_EQ(pa.flows, pb.flows);
  }
}

TEST(Delivery, WarmPathSkipsSignalingWhenDisabled) {
  ModelParams p;
  p.resignal_warm_paths = false;
  Fixture f(line5(), 20, p);
  const auto q = Query::all(0, 360);
  const auto first = client_request(f.st, 4, q, DeploymentMode::edge_only, 360);
  EXPECT_TRUE(first.signaled);
  const auto second = client_request(f.st, 4, q, DeploymentMode::edge_only, first.end());
  EXPECT_FALSE(second.signaled);
  EXPECT_EQ(second.timing.t_signaling, 0);
  EXPECT_EQ(second.bytes(TrafficClass::signaling), 0u);
  EXPECT_EQ(second.redirect_target, 3u);
}

TEST(Delivery, RejectsBadRequests) {
  Fixture f(line5());
  EXPECT_THROW(client_request(f.st, 3, Query::all(0, 360), DeploymentMode::edge_only, 360), QueryError);
  EXPECT_THROW(client_request(f.st, 99, Query::all(0, 360), DeploymentMode::edge_only, 360), QueryError);
  // window not yet closed
  EXPECT_THROW(client_request(f.st, 4, Query::all(0, 360), DeploymentMode::edge_only, 300), QueryError);
}

TEST(Delivery, ExpiredCacheDuringDownloadForwardsTransparently) {
  ModelParams p;
  p.handshake.ttl = 1.0;  // expires before the data phase starts
  Fixture f(line5(), 20, p);
  const auto q = Query::all(0, 360);
  const auto o = client_request(f.st, 4, q, DeploymentMode::edge_only, 360);
  EXPECT_EQ(o.package->entries(), oracle_select(f.readings, q));
  EXPECT_EQ(o.bytes(TrafficClass::http), f.readings.size() * 180 * 4);
  EXPECT_FALSE(f.st.caches.warnings().empty());
}

TEST(Delivery, RemoveAllForcesFreshInstalls) {
  Fixture f(line5());
  const auto q = Query::all(0, 360);
  const auto first = client_request(f.st, 4, q, DeploymentMode::edge_only, 360);
  const auto flows = remove_all(f.st, first.end());
  EXPECT_EQ(byte_hops(flows, TrafficClass::signaling), 128u * 4);
  EXPECT_TRUE(f.st.caches.instances().empty());
  // second REMOVE round has nothing to tear down
  EXPECT_TRUE(remove_all(f.st, first.end()).empty());
  const auto again = client_request(f.st, 4, q, DeploymentMode::edge_only, first.end() + 1);
  // gateway memo spares the creation time, but the data crosses every link again
  EXPECT_EQ(again.bytes(TrafficClass::http), first.bytes(TrafficClass::http));
}

TEST(Delivery, EqualShareSlowsOverlappingFlows) {
  Fixture f(line5());
  f.st.concurrency = Concurrency::equal_share;
  const auto q = Query::all(0, 360);
  auto a = plan_request(f.st, 4, q, DeploymentMode::legacy, 360, 0);
  f.st.in_flight.emplace_back(a.outcome.end(), a.links);
  auto b = plan_request(f.st, 5, q, DeploymentMode::legacy, 360, 1);
  EXPECT_GT(b.outcome.timing.t_http, a.outcome.timing.t_http * 1.5);
}
