#include <sstream>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace sensorcdn;
using namespace sensorcdn::testing;

namespace {

// gateway 0 - edge 1 - core 2 - core 3 - edge 4 - end 5: five hops.
Topology five_hop(bool core3_programmable = false) {
  return Topology::build({{0, NodeKind::gateway},
                          {1, NodeKind::edge, true},
                          {2, NodeKind::core, true},
                          {3, NodeKind::core, core3_programmable},
                          {4, NodeKind::edge, true},
                          {5, NodeKind::end}},
                         {{0, 1, 1e7, 0}, {1, 2, 1e8, 0}, {2, 3, 1e8, 0}, {3, 4, 1e8, 0}, {4, 5, 1e9, 0}});
}

}  // namespace

TEST(Signaling, HandshakeByteCount) {
  const auto t = five_hop();
  CacheRegistry reg(t);
  auto s = start_session(t, 0, 5, DeploymentMode::edge_only);
  const auto r = run_handshake(s, t, reg, {}, 0);
  // 4 messages x 128 B x 5 links
  EXPECT_EQ(byte_hops(r.flows, TrafficClass::signaling), 2560u);
  EXPECT_EQ(s.trace.size(), 20u);
  // SETUP, PROBE and SETUP_CONFIG go downstream, PROBE_RESPONSE comes back
  for (const auto& [link, bytes] : r.signaling_bytes_per_link())
    EXPECT_EQ(bytes, link.first < link.second ? 3u * 128u : 128u) << link.first << "->" << link.second;
  EXPECT_DOUBLE_EQ(r.latency, 1.6);
}

TEST(Signaling, ChainAndUpstreamMap) {
  const auto t = five_hop();
  CacheRegistry reg(t);
  auto s = start_session(t, 0, 5, DeploymentMode::edge_only);
  const auto r = run_handshake(s, t, reg, {}, 0);
  EXPECT_EQ(r.chain.caches, (std::vector<NodeId>{1, 4}));
  EXPECT_EQ(r.chain.upstream_of, (UpstreamMap{{1, 0}, {4, 1}}));
  EXPECT_EQ(r.chain.redirect_target, 4u);
  EXPECT_EQ(reg.find(4)->upstream, std::optional<NodeId>(1));
  EXPECT_EQ(reg.find(1)->upstream, std::optional<NodeId>(0));
  EXPECT_EQ(reg.find(2), nullptr);
  EXPECT_EQ(s.phase, SessionPhase::configured);
}

TEST(Signaling, ChainMatchesFilterOracleOnRef60) {
  const auto t = ref60();
  for (auto mode : {DeploymentMode::edge_only, DeploymentMode::edge_plus_core}) {
    for (NodeId c : t.nodes_of_kind(NodeKind::end)) {
      CacheRegistry reg(t);
      auto s = start_session(t, t.gateway(), c, mode);
      const auto r = run_handshake(s, t, reg, {}, 0);
      EXPECT_EQ(r.chain.caches, programmable_chain(t, s.path, mode));
      EXPECT_EQ(r.fresh_installs, r.chain.caches);
      EXPECT_EQ(byte_hops(r.flows, TrafficClass::signaling), 4u * 128u * s.path.hops());
    }
  }
}

TEST(Signaling, LegacySendsNothing) {
  const auto t = five_hop();
  CacheRegistry reg(t);
  auto s = start_session(t, 0, 5, DeploymentMode::legacy);
  const auto r = run_handshake(s, t, reg, {}, 0);
  EXPECT_TRUE(r.flows.empty());
  EXPECT_TRUE(r.chain.empty());
  EXPECT_EQ(r.chain.redirect_target, 0u);
  EXPECT_EQ(r.latency, 0);
  EXPECT_TRUE(reg.instances().empty());
}

TEST(Signaling, IllegalTransitionsThrow) {
  const auto t = five_hop();
  auto s = start_session(t, 0, 5, DeploymentMode::edge_only);
  NslpMessage probe{Probe{}};
  EXPECT_THROW(propagate(s, probe, t), ProtocolError);
  NslpMessage config{sensorcdn::Setup{kSensorCdnBundle, 600, UpstreamMap{}}};
  EXPECT_THROW(propagate(s, config, t), ProtocolError);
  NslpMessage remove{Remove{}};
  EXPECT_THROW(propagate(s, remove, t), ProtocolError);
  NslpMessage zero_ttl{sensorcdn::Setup{kSensorCdnBundle, 0, std::nullopt}};
  EXPECT_THROW(propagate(s, zero_ttl, t), ProtocolError);

  NslpMessage setup{sensorcdn::Setup{}};
  propagate(s, setup, t);
  EXPECT_THROW(propagate(s, setup, t), ProtocolError);
  NslpMessage early_response{ProbeResponse{}};
  EXPECT_THROW(propagate(s, early_response, t), ProtocolError);
  propagate(s, probe, t);
  EXPECT_THROW(propagate(s, probe, t), ProtocolError);
  // rejected messages charge nothing
  EXPECT_EQ(s.flows.size(), 10u);
}

TEST(Signaling, ProbeCollectsInPathOrderAndResponseTravelsBack) {
  const auto t = five_hop(true);
  auto s = start_session(t, 0, 5, DeploymentMode::edge_plus_core);
  NslpMessage setup{sensorcdn::Setup{}};
  propagate(s, setup, t);
  NslpMessage probe{Probe{}};
  const auto hits = propagate(s, probe, t);
  EXPECT_EQ(std::get<Probe>(probe.body).collected, (std::vector<NodeId>{1, 2, 3, 4}));
  ASSERT_EQ(hits.size(), 4u);
  NslpMessage resp{ProbeResponse{}};
  const auto back = propagate(s, resp, t);
  ASSERT_EQ(back.size(), 4u);
  EXPECT_EQ(back.front().node, 4u);
  EXPECT_EQ(s.flows.back().from, 1u);
  EXPECT_EQ(s.flows.back().to, 0u);
}

TEST(Signaling, NonProgrammableNodesAreTransparent) {
  const auto t = five_hop(false);
  auto s = start_session(t, 0, 5, DeploymentMode::edge_plus_core);
  NslpMessage setup{sensorcdn::Setup{}};
  const auto hits = propagate(s, setup, t);
  std::vector<NodeId> seen;
  for (const auto& h : hits) seen.push_back(h.node);
  EXPECT_EQ(seen, (std::vector<NodeId>{1, 2, 4}));
}

TEST(Signaling, RemoveTearsDownChain) {
  const auto t = five_hop();
  CacheRegistry reg(t);
  auto s = start_session(t, 0, 5, DeploymentMode::edge_only);
  run_handshake(s, t, reg, {}, 0);
  const auto r = send_remove(s, t, reg, 128, 10);
  EXPECT_EQ(r.uninstalled, (std::vector<NodeId>{1, 4}));
  EXPECT_EQ(byte_hops(r.flows, TrafficClass::signaling), 5u * 128u);
  EXPECT_TRUE(reg.instances().empty());
  EXPECT_EQ(s.phase, SessionPhase::removed);
  EXPECT_THROW(send_remove(s, t, reg, 128, 11), ProtocolError);
}

TEST(Signaling, BundleBytesChargedOnFreshInstallsOnly) {
  const auto t = five_hop();
  CacheRegistry reg(t);
  HandshakeParams p;
  p.bundle_bytes = 1000;
  auto s1 = start_session(t, 0, 5, DeploymentMode::edge_only, 1);
  const auto r1 = run_handshake(s1, t, reg, p, 0);
  // node 1 at path index 1, node 4 at path index 4
  EXPECT_EQ(byte_hops(r1.flows, TrafficClass::bundle), 1000u * (1 + 4));
  auto s2 = start_session(t, 0, 5, DeploymentMode::edge_only, 2);
  const auto r2 = run_handshake(s2, t, reg, p, 10);
  EXPECT_EQ(byte_hops(r2.flows, TrafficClass::bundle), 0u);
}

TEST(Signaling, TraceCsvShape) {
  const auto t = five_hop();
  CacheRegistry reg(t);
  auto s = start_session(t, 0, 5, DeploymentMode::edge_only);
  run_handshake(s, t, reg, {}, 2);
  std::ostringstream out;
  write_trace_csv(out, s.trace);
  const auto text = out.str();
  EXPECT_EQ(text.rfind("time,variant,from,to,bytes\n", 0), 0u);
  EXPECT_NE(text.find("SETUP_CONFIG"), std::string::npos);
  EXPECT_NE(text.find("3.200000000,SETUP_CONFIG"), std::string::npos);
}
