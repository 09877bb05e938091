#pragma once

// Power-delivery transmission policy: paced broadcast power packets per
// channel behind a queue-depth gate, the comparison schemes, and the traffic
// generators used for clients and neighboring networks.

#include "powifi/mac.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace powifi::router {

using mac::ConfigError;

inline constexpr double kPowiFiSlowDelayUs = 500.0;
inline constexpr int kBeaconBytes = 300;
inline constexpr double kBeaconRateMbps = 1.0;
inline constexpr double kBeaconIntervalUs = 102'400.0;

struct PowerPolicy {
  double inter_packet_delay_us = 100.0;
  int packet_size = 1500;
  double rate_mbps = 54.0;
  int queue_threshold = 5;
  bool gate_enabled = true;

  void validate() const {
    if (!(inter_packet_delay_us > 0.0)) throw ConfigError("inter_packet_delay_us must be positive");
    if (packet_size < 1 || packet_size > 1500) throw ConfigError("packet_size must be in 1..1500 bytes");
    if (!mac::is_valid_rate(rate_mbps)) throw ConfigError("power rate must be a supported rate");
    if (queue_threshold < 1) throw ConfigError("queue_threshold must be positive");
  }
};

enum class GateDecision { admit, drop };

// Drop once the interface already holds `queue_threshold` frames or more.
inline GateDecision power_gate(std::size_t queue_depth, const PowerPolicy& policy) {
  if (!policy.gate_enabled) return GateDecision::admit;
  return queue_depth < static_cast<std::size_t>(policy.queue_threshold) ? GateDecision::admit : GateDecision::drop;
}

inline double next_power_packet_time(double t_last_emit_us, const PowerPolicy& policy) {
  if (t_last_emit_us < 0.0) throw DomainError("emit time must be >= 0");
  return t_last_emit_us + policy.inter_packet_delay_us;
}

enum class SchemeKind { Baseline, BlindUDP, NoQueue, PoWiFi, PoWiFiSlow, EqualShare };

struct Scheme {
  SchemeKind kind = SchemeKind::PoWiFi;
  double equal_share_rate_mbps = 54.0;  // EqualShare only
};

inline std::string_view to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::Baseline: return "Baseline";
    case SchemeKind::BlindUDP: return "BlindUDP";
    case SchemeKind::NoQueue: return "NoQueue";
    case SchemeKind::PoWiFi: return "PoWiFi";
    case SchemeKind::PoWiFiSlow: return "PoWiFiSlow";
    case SchemeKind::EqualShare: return "EqualShare";
  }
  return "?";
}

inline std::optional<SchemeKind> parse_scheme(std::string_view s) {
  for (auto k : {SchemeKind::Baseline, SchemeKind::BlindUDP, SchemeKind::NoQueue, SchemeKind::PoWiFi,
                 SchemeKind::PoWiFiSlow, SchemeKind::EqualShare})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct ChannelPolicy {
  int channel;
  std::optional<PowerPolicy> policy;  // nullopt: no power traffic on this channel
};

inline std::vector<ChannelPolicy> configure_scheme(const Scheme& scheme, PowerPolicy base = {},
                                                   const std::vector<int>& channels = {1, 6, 11}) {
  std::optional<PowerPolicy> p = base;
  switch (scheme.kind) {
    case SchemeKind::Baseline: p.reset(); break;
    case SchemeKind::BlindUDP:
      p->rate_mbps = 1.0;
      p->gate_enabled = false;
      break;
    case SchemeKind::NoQueue: p->gate_enabled = false; break;
    case SchemeKind::PoWiFi: p->gate_enabled = true; break;
    case SchemeKind::PoWiFiSlow:
      p->inter_packet_delay_us = kPowiFiSlowDelayUs;
      p->gate_enabled = true;
      break;
    case SchemeKind::EqualShare:
      p->rate_mbps = scheme.equal_share_rate_mbps;
      p->gate_enabled = false;
      break;
  }
  if (p) p->validate();
  std::vector<ChannelPolicy> out;
  for (int ch : channels) out.push_back({ch, p});
  return out;
}

// ---------------------------------------------------------------------------
// Traffic generators

struct UdpCbr {
  double target_mbps = 10.0;
};
struct BackloggedTraffic {};
struct BurstTraffic {
  double on_ms = 50.0;
  double off_ms = 950.0;
  int bytes_per_burst = 75'000;
};

using TrafficKind = std::variant<UdpCbr, BackloggedTraffic, BurstTraffic>;

struct TrafficGen {
  TrafficKind kind = BackloggedTraffic{};
  std::string destination;
  double rate_mbps = 54.0;
  int frame_bytes = 1500;

  void validate() const {
    if (const auto* u = std::get_if<UdpCbr>(&kind); u && !(u->target_mbps > 0.0))
      throw ConfigError("udp_cbr target rate must be positive");
    if (const auto* b = std::get_if<BurstTraffic>(&kind);
        b && (!(b->on_ms >= 0.0) || !(b->off_ms >= 0.0) || b->on_ms + b->off_ms <= 0.0 || b->bytes_per_burst < 1))
      throw ConfigError("burst traffic needs on_ms/off_ms >= 0 with a positive period and bytes_per_burst >= 1");
    if (!mac::is_valid_rate(rate_mbps)) throw ConfigError("traffic rate must be a supported rate");
  }
};

inline mac::SimTime us_to_ns(double us) { return static_cast<mac::SimTime>(std::llround(us * mac::kNsPerUs)); }

inline mac::FlowSpec power_flow(const PowerPolicy& policy) {
  mac::FlowSpec f;
  f.name = "power";
  f.kind = mac::FrameKind::power_broadcast;
  f.size_bytes = policy.packet_size;
  f.rate_mbps = policy.rate_mbps;
  f.source = mac::Periodic{us_to_ns(policy.inter_packet_delay_us), 0, false};
  f.admit = [policy](std::size_t depth) { return power_gate(depth, policy) == GateDecision::admit; };
  return f;
}

inline mac::FlowSpec beacon_flow() {
  mac::FlowSpec f;
  f.name = "beacon";
  f.kind = mac::FrameKind::beacon;
  f.size_bytes = kBeaconBytes;
  f.rate_mbps = kBeaconRateMbps;
  f.source = mac::Periodic{us_to_ns(kBeaconIntervalUs), 0, true};
  return f;
}

inline mac::FlowSpec traffic_flow(std::string name, mac::FrameKind kind, const TrafficGen& gen) {
  gen.validate();
  mac::FlowSpec f;
  f.name = std::move(name);
  f.kind = kind;
  f.size_bytes = gen.frame_bytes;
  f.rate_mbps = gen.rate_mbps;
  if (const auto* u = std::get_if<UdpCbr>(&gen.kind)) {
    f.source = mac::Periodic{us_to_ns(gen.frame_bytes * 8.0 / u->target_mbps), 0, true};
  } else if (const auto* b = std::get_if<BurstTraffic>(&gen.kind)) {
    const int frames = (b->bytes_per_burst + gen.frame_bytes - 1) / gen.frame_bytes;
    f.source = mac::Bursts{us_to_ns(b->on_ms * 1e3), us_to_ns((b->on_ms + b->off_ms) * 1e3), frames};
    f.capacity = std::max<std::size_t>(f.capacity, static_cast<std::size_t>(frames) * 2);
  } else {
    f.source = mac::Backlogged{};
  }
  return f;
}

// ---------------------------------------------------------------------------
// Throughput

struct FlowKey {
  std::string station;
  mac::FrameKind kind;
};

// Delivered payload bits per bin, in Mbps. Bins cover [0, trace duration).
inline std::vector<double> throughput_series(const mac::ChannelTrace& trace, const FlowKey& flow, double bin_ms) {
  if (!(bin_ms > 0.0)) throw DomainError("throughput bin must be positive");
  const double bin_us = bin_ms * 1e3;
  const auto bins = static_cast<std::size_t>(std::ceil(trace.duration_us / bin_us - 1e-9));
  std::vector<double> bits(bins, 0.0);
  for (const auto& r : trace.records) {
    if (r.outcome != mac::Outcome::delivered || r.frame.kind != flow.kind || r.frame.station != flow.station) continue;
    const auto b = static_cast<std::size_t>(r.t_start_us / bin_us);
    if (b < bins) bits[b] += r.frame.size_bytes * 8.0;
  }
  for (auto& v : bits) v /= bin_us;  // bits per microsecond == Mbps
  return bits;
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace powifi::router
