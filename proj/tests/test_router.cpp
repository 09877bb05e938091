#include "powifi/router.hpp"

#include <gtest/gtest.h>

using namespace powifi;
using namespace powifi::router;

TEST(Gate, Threshold) {
  const PowerPolicy p;
  EXPECT_EQ(power_gate(4, p), GateDecision::admit);
  EXPECT_EQ(power_gate(5, p), GateDecision::drop);
  EXPECT_EQ(power_gate(0, p), GateDecision::admit);
  PowerPolicy off = p;
  off.gate_enabled = false;
  EXPECT_EQ(power_gate(500, off), GateDecision::admit);
}

TEST(Pacing, NextPacket) {
  const PowerPolicy p;
  EXPECT_DOUBLE_EQ(next_power_packet_time(0.0, p), 100.0);
  PowerPolicy slow = p;
  slow.inter_packet_delay_us = kPowiFiSlowDelayUs;
  EXPECT_DOUBLE_EQ(next_power_packet_time(1000.0, slow), 1500.0);
  PowerPolicy zero = p;
  zero.inter_packet_delay_us = 0.0;
  EXPECT_THROW(zero.validate(), mac::ConfigError);
}

TEST(Schemes, Presets) {
  const auto pw = configure_scheme({SchemeKind::PoWiFi});
  ASSERT_EQ(pw.size(), 3u);
  for (const auto& cp : pw) {
    ASSERT_TRUE(cp.policy);
    EXPECT_DOUBLE_EQ(cp.policy->inter_packet_delay_us, 100.0);
    EXPECT_EQ(cp.policy->packet_size, 1500);
    EXPECT_DOUBLE_EQ(cp.policy->rate_mbps, 54.0);
    EXPECT_EQ(cp.policy->queue_threshold, 5);
    EXPECT_TRUE(cp.policy->gate_enabled);
  }
  EXPECT_EQ(pw[0].channel, 1);
  EXPECT_EQ(pw[1].channel, 6);
  EXPECT_EQ(pw[2].channel, 11);
  for (const auto& cp : configure_scheme({SchemeKind::Baseline})) EXPECT_FALSE(cp.policy);
  const auto blind = configure_scheme({SchemeKind::BlindUDP});
  EXPECT_DOUBLE_EQ(blind[0].policy->rate_mbps, 1.0);
  EXPECT_FALSE(blind[0].policy->gate_enabled);
  const auto nq = configure_scheme({SchemeKind::NoQueue});
  EXPECT_DOUBLE_EQ(nq[0].policy->rate_mbps, 54.0);
  EXPECT_FALSE(nq[0].policy->gate_enabled);
  const auto eq = configure_scheme({SchemeKind::EqualShare, 16.0});
  EXPECT_DOUBLE_EQ(eq[0].policy->rate_mbps, 16.0);
  EXPECT_FALSE(eq[0].policy->gate_enabled);
  EXPECT_DOUBLE_EQ(configure_scheme({SchemeKind::PoWiFiSlow})[0].policy->inter_packet_delay_us, 500.0);
  for (auto k : {SchemeKind::Baseline, SchemeKind::BlindUDP, SchemeKind::NoQueue, SchemeKind::PoWiFi,
                 SchemeKind::PoWiFiSlow, SchemeKind::EqualShare})
    EXPECT_EQ(parse_scheme(to_string(k)), k);
  EXPECT_FALSE(parse_scheme("Turbo"));
}

TEST(Throughput, OneFrame) {
  mac::ChannelTrace t;
  t.duration_us = 1e6;
  mac::FrameRecord r;
  r.frame = {"ap", 1, 1500, 54.0, mac::FrameKind::client_data};
  r.t_start_us = 10.0;
  t.records.push_back(r);
  const auto s = throughput_series(t, {"ap", mac::FrameKind::client_data}, 500.0);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_NEAR(s[0], 0.024, 1e-12);
  EXPECT_EQ(s[1], 0.0);
  t.records.clear();
  for (double v : throughput_series(t, {"ap", mac::FrameKind::client_data}, 500.0)) EXPECT_EQ(v, 0.0);
}

TEST(Throughput, BackloggedAloneAtFiftyFour) {
  TrafficGen gen;
  gen.kind = BackloggedTraffic{};
  std::vector<mac::StationSpec> st{{"router", 1, {traffic_flow("c", mac::FrameKind::client_data, gen)}}};
  const auto run = mac::run_mac(st, 10 * mac::kNsPerSec, {}, 3);
  const auto s = throughput_series(run.traces[0], {"router", mac::FrameKind::client_data}, 500.0);
  ASSERT_EQ(s.size(), 20u);
  for (double v : s) {
    EXPECT_GE(v, 28.0);
    EXPECT_LE(v, 34.0);
  }
}

TEST(Throughput, UdpCbrBelowCapacityIsCarried) {
  TrafficGen gen;
  gen.kind = UdpCbr{10.0};
  std::vector<mac::StationSpec> st{{"router", 1, {traffic_flow("c", mac::FrameKind::client_data, gen)}}};
  const auto run = mac::run_mac(st, 10 * mac::kNsPerSec, {}, 3);
  EXPECT_NEAR(mean(throughput_series(run.traces[0], {"router", mac::FrameKind::client_data}, 500.0)), 10.0, 0.1);
}

TEST(PowerFlow, GateHoldsQueueAtThreshold) {
  // A 1 Mbps frame lasts 12 ms, so a 100 us source backs up immediately.
  PowerPolicy p;
  p.rate_mbps = 1.0;
  std::vector<mac::StationSpec> st{{"router", 6, {power_flow(p)}}};
  const auto run = mac::run_mac(st, mac::kNsPerSec, {}, 1);
  const auto& f = run.flows[0];
  EXPECT_GT(f.gate_drops, 0u);
  EXPECT_EQ(f.tail_drops, 0u);
  EXPECT_LE(f.offered - f.gate_drops - f.delivered - f.lost, 5u);
}

TEST(Traffic, Validation) {
  TrafficGen g;
  g.kind = UdpCbr{0.0};
  EXPECT_THROW(g.validate(), mac::ConfigError);
  g.kind = BurstTraffic{0.0, 0.0, 1000};
  EXPECT_THROW(g.validate(), mac::ConfigError);
  g.kind = BackloggedTraffic{};
  g.rate_mbps = 3.0;
  EXPECT_THROW(g.validate(), mac::ConfigError);
}
