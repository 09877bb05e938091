#pragma once

// Declarative experiments: load a scenario file, run the MAC engine and the
// harvesters it drives, aggregate metrics, and sweep one variable.

#include "powifi/config.hpp"
#include "powifi/fcc.hpp"
#include "powifi/harvester.hpp"
#include "powifi/mac.hpp"
#include "powifi/rf.hpp"
#include "powifi/router.hpp"
#include "powifi/trace_io.hpp"
#include "powifi/units.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace powifi::scenario {

using config::ConfigError;

inline constexpr std::string_view kRouterId = "router";

// ---------------------------------------------------------------------------
// Scenario description

struct RouterConfig {
  router::Scheme scheme{router::SchemeKind::PoWiFi};
  std::vector<int> channels{1, 6, 11};
  int internet_channel = 1;
  fcc::TxPlan plan{1, GainDbi{6.0}, fcc::Uncorrelated{}, PowerDbm{30.0}};
  router::PowerPolicy policy{};
  // Policy fields set explicitly in the file; these win over scheme presets.
  std::set<std::string> policy_overrides;
  bool beacons = true;

  std::vector<router::ChannelPolicy> channel_policies() const {
    auto out = router::configure_scheme(scheme, policy, channels);
    for (auto& cp : out) {
      if (!cp.policy) continue;
      auto& p = *cp.policy;
      if (policy_overrides.count("inter_packet_delay_us")) p.inter_packet_delay_us = policy.inter_packet_delay_us;
      if (policy_overrides.count("packet_size")) p.packet_size = policy.packet_size;
      if (policy_overrides.count("power_rate_mbps")) p.rate_mbps = policy.rate_mbps;
      if (policy_overrides.count("queue_threshold")) p.queue_threshold = policy.queue_threshold;
      if (policy_overrides.count("gate_enabled")) p.gate_enabled = policy.gate_enabled;
      p.validate();
    }
    return out;
  }
};

enum class Role { client, neighbor_ap };

struct StationConfig {
  std::string id;
  Role role = Role::client;
  int channel = 1;
  double rate_mbps = 54.0;
  std::optional<router::TrafficGen> traffic;  // nullopt: silent
  bool beacons = true;                        // neighbor APs only
};

struct HarvesterSetup {
  std::string id;
  Distance distance = Distance::feet(10.0);
  rf::WallMaterial wall = rf::WallMaterial::none;
  GainDbi g_rx{2.0};
  harvester::HarvesterConfig cfg = harvester::HarvesterConfig::temperature_battery_free();
  std::string preset = "temperature_battery_free";

  rf::LinkGeometry link(int channel) const { return {distance, rf::channel_center(channel), wall}; }
};

struct Scenario {
  double duration_s = 60.0;
  std::uint64_t seed = 1;
  std::optional<double> harvester_duration_s;  // defaults to duration_s
  double bin_ms = 500.0;
  double harvester_bin_us = 1000.0;  // 0: exact per-transmission segments
  RouterConfig router;
  std::vector<StationConfig> stations;
  std::vector<HarvesterSetup> harvesters;
  mac::MacParams mac;

  double harvest_seconds() const { return harvester_duration_s.value_or(duration_s); }

  void validate() const {
    if (!(duration_s > 0.0)) throw ConfigError("duration_s must be positive");
    if (harvester_duration_s && !(*harvester_duration_s > 0.0)) throw ConfigError("harvester_duration_s must be positive");
    if (!(bin_ms > 0.0)) throw ConfigError("bin_ms must be positive");
    if (harvester_bin_us < 0.0) throw ConfigError("harvester_bin_us must be >= 0");
    std::set<std::string> ids{std::string(kRouterId)};
    for (const auto& s : stations) {
      if (!ids.insert(s.id).second) throw ConfigError("duplicate station id '" + s.id + "'");
      if (s.role == Role::client && s.channel != router.internet_channel)
        throw ConfigError("client '" + s.id + "' must sit on the internet channel " + std::to_string(router.internet_channel));
    }
    std::set<std::string> hids;
    for (const auto& h : harvesters) {
      if (!hids.insert(h.id).second) throw ConfigError("duplicate harvester id '" + h.id + "'");
      h.cfg.validate();
    }
    if (std::find(router.channels.begin(), router.channels.end(), router.internet_channel) == router.channels.end())
      throw ConfigError("internet_channel must be one of the router channels");
    router.plan.validate();
    mac.validate();
  }
};

// ---------------------------------------------------------------------------
// Loading

namespace detail {

inline int parse_channel(const config::Section& s, std::string_view key, const std::string& v) {
  if (v == "1") return 1;
  if (v == "6") return 6;
  if (v == "11") return 11;
  s.fail_key(key, "channel must be 1, 6 or 11, got '" + v + "'");
}

inline double parse_rate(const config::Section& s, std::string_view key) {
  const double r = *s.number(key);
  if (!mac::is_valid_rate(r)) s.fail_key(key, "not a supported rate");
  return r;
}

inline std::optional<router::TrafficGen> parse_traffic(const config::Section& s, double rate) {
  const std::string kind = s.text("traffic").value_or("none");
  router::TrafficGen gen;
  gen.rate_mbps = rate;
  gen.destination = s.name();
  if (auto fb = s.integer("frame_bytes")) {
    if (*fb < 1 || *fb > 1500) s.fail_key("frame_bytes", "must be in 1..1500");
    gen.frame_bytes = static_cast<int>(*fb);
  }
  if (kind == "none") return std::nullopt;
  if (kind == "backlogged") {
    gen.kind = router::BackloggedTraffic{};
  } else if (kind == "udp_cbr") {
    s.require("target_mbps", [](double v) { return v > 0.0; }, "must be positive");
    gen.kind = router::UdpCbr{s.number("target_mbps").value_or(10.0)};
  } else if (kind == "burst") {
    router::BurstTraffic b;
    s.require("on_ms", [](double v) { return v >= 0.0; }, "must be >= 0");
    s.require("off_ms", [](double v) { return v >= 0.0; }, "must be >= 0");
    b.on_ms = s.number("on_ms").value_or(b.on_ms);
    b.off_ms = s.number("off_ms").value_or(b.off_ms);
    if (auto bytes = s.integer("bytes_per_burst")) {
      if (*bytes < 1) s.fail_key("bytes_per_burst", "must be >= 1");
      b.bytes_per_burst = static_cast<int>(*bytes);
    }
    gen.kind = b;
  } else {
    s.fail_key("traffic", "expected none, backlogged, udp_cbr or burst, got '" + kind + "'");
  }
  return gen;
}

inline harvester::HarvesterConfig preset_config(const config::Section& s, const std::string& name) {
  using harvester::HarvesterConfig;
  if (name == "temperature_battery_free") return HarvesterConfig::temperature_battery_free();
  if (name == "temperature_battery") return HarvesterConfig::temperature_battery();
  if (name == "camera_battery_free") return HarvesterConfig::camera_battery_free();
  if (name == "camera_battery") return HarvesterConfig::camera_battery();
  s.fail_key("preset", "unknown preset '" + name + "'");
}

inline void load_root(const config::Section& s, Scenario& sc) {
  s.require("duration_s", [](double v) { return v > 0.0; }, "must be positive");
  s.require("harvester_duration_s", [](double v) { return v > 0.0; }, "must be positive");
  s.require("bin_ms", [](double v) { return v > 0.0; }, "must be positive");
  s.require("harvester_bin_us", [](double v) { return v >= 0.0; }, "must be >= 0");
  sc.duration_s = s.number("duration_s").value_or(sc.duration_s);
  if (auto seed = s.integer("seed")) {
    if (*seed < 0) s.fail_key("seed", "must be >= 0");
    sc.seed = static_cast<std::uint64_t>(*seed);
  } else {
    throw ConfigError("missing required key 'seed'");
  }
  if (auto h = s.number("harvester_duration_s")) sc.harvester_duration_s = *h;
  sc.bin_ms = s.number("bin_ms").value_or(sc.bin_ms);
  sc.harvester_bin_us = s.number("harvester_bin_us").value_or(sc.harvester_bin_us);
  s.reject_unused();
}

inline void load_router(const config::Section& s, Scenario& sc) {
  auto& r = sc.router;
  if (auto name = s.text("scheme")) {
    auto k = router::parse_scheme(*name);
    if (!k) s.fail_key("scheme", "unknown scheme '" + *name + "'");
    r.scheme.kind = *k;
  }
  if (s.has("equal_share_rate_mbps")) r.scheme.equal_share_rate_mbps = parse_rate(s, "equal_share_rate_mbps");
  if (auto chs = s.list("channels")) {
    r.channels.clear();
    for (const auto& c : *chs) r.channels.push_back(parse_channel(s, "channels", c));
    if (r.channels.empty()) s.fail_key("channels", "needs at least one channel");
  }
  if (auto ic = s.text("internet_channel")) r.internet_channel = parse_channel(s, "internet_channel", *ic);
  if (auto p = s.number("tx_power_dbm")) r.plan.total_conducted = PowerDbm{*p};
  if (auto g = s.number("antenna_gain_dbi")) r.plan.g_ant = GainDbi{*g};
  if (auto n = s.integer("n_ant")) {
    if (*n < 1) s.fail_key("n_ant", "must be >= 1");
    r.plan.n_ant = static_cast<int>(*n);
  }
  const std::string corr = s.text("correlation").value_or("uncorrelated");
  s.require("beamforming_efficiency", [](double v) { return v > 0.0 && v <= 1.0; }, "must be in (0, 1]");
  const double eta = s.number("beamforming_efficiency").value_or(1.0);
  if (corr == "correlated")
    r.plan.correlation = fcc::Correlated{eta};
  else if (corr == "uncorrelated")
    r.plan.correlation = fcc::Uncorrelated{};
  else
    s.fail_key("correlation", "expected correlated or uncorrelated");

  s.require("inter_packet_delay_us", [](double v) { return v > 0.0; }, "must be positive");
  if (auto d = s.number("inter_packet_delay_us")) {
    r.policy.inter_packet_delay_us = *d;
    r.policy_overrides.insert("inter_packet_delay_us");
  }
  if (auto ps = s.integer("packet_size")) {
    if (*ps < 1 || *ps > 1500) s.fail_key("packet_size", "must be in 1..1500");
    r.policy.packet_size = static_cast<int>(*ps);
    r.policy_overrides.insert("packet_size");
  }
  if (s.has("power_rate_mbps")) {
    r.policy.rate_mbps = parse_rate(s, "power_rate_mbps");
    r.policy_overrides.insert("power_rate_mbps");
  }
  if (auto q = s.integer("queue_threshold")) {
    if (*q < 1) s.fail_key("queue_threshold", "must be positive");
    r.policy.queue_threshold = static_cast<int>(*q);
    r.policy_overrides.insert("queue_threshold");
  }
  if (auto g = s.boolean("gate_enabled")) {
    r.policy.gate_enabled = *g;
    r.policy_overrides.insert("gate_enabled");
  }
  r.beacons = s.boolean("beacons").value_or(true);
  s.reject_unused();
}

inline void load_station(const config::Section& s, Scenario& sc) {
  if (s.name().empty()) throw ConfigError("line " + std::to_string(s.line()) + ": [station] needs an id");
  StationConfig st;
  st.id = s.name();
  const std::string role = s.text("role").value_or("client");
  if (role == "client")
    st.role = Role::client;
  else if (role == "neighbor_ap")
    st.role = Role::neighbor_ap;
  else
    s.fail_key("role", "expected client or neighbor_ap");
  st.channel = sc.router.internet_channel;
  if (auto c = s.text("channel")) st.channel = parse_channel(s, "channel", *c);
  if (s.has("rate_mbps")) st.rate_mbps = parse_rate(s, "rate_mbps");
  st.traffic = parse_traffic(s, st.rate_mbps);
  st.beacons = s.boolean("beacons").value_or(st.role == Role::neighbor_ap);
  s.reject_unused();
  sc.stations.push_back(std::move(st));
}

inline void load_harvester(const config::Section& s, Scenario& sc) {
  if (s.name().empty()) throw ConfigError("line " + std::to_string(s.line()) + ": [harvester] needs an id");
  HarvesterSetup h;
  h.id = s.name();
  s.require("distance_ft", [](double v) { return v > 0.0; }, "distance must be positive");
  s.require("distance_m", [](double v) { return v > 0.0; }, "distance must be positive");
  if (s.has("distance_ft") && s.has("distance_m")) s.fail_key("distance_m", "give distance_ft or distance_m, not both");
  if (auto ft = s.number("distance_ft")) h.distance = Distance::feet(*ft);
  if (auto m = s.number("distance_m")) h.distance = Distance::meters(*m);
  if (auto w = s.text("wall")) {
    auto wall = rf::parse_wall(*w);
    if (!wall) s.fail_key("wall", "unknown wall material '" + *w + "'");
    h.wall = *wall;
  }
  if (auto g = s.number("g_rx_dbi")) h.g_rx = GainDbi{*g};
  h.preset = s.text("preset").value_or(h.preset);
  h.cfg = preset_config(s, h.preset);
  auto& cfg = h.cfg;
  if (auto m = s.boolean("multichannel_summation")) cfg.multichannel_summation = *m;
  if (auto sens = s.number("sensitivity_dbm")) {
    cfg.curve.sensitivity = PowerDbm{*sens};
    cfg.curve.anchors.front().p_in = PowerDbm{*sens};
  }
  s.require("matching_loss_db", [](double v) { return v >= 0.0; }, "must be >= 0");
  if (auto ml = s.number("matching_loss_db")) cfg.curve.matching_loss = Decibels{*ml};
  s.require("e_op_j", [](double v) { return v > 0.0; }, "must be positive");
  if (auto e = s.number("e_op_j")) cfg.load.e_op_j = *e;
  if (auto v = s.number("v_min")) cfg.load.v_min = *v;
  if (auto* cap = std::get_if<harvester::Capacitor>(&cfg.storage)) {
    s.require("capacitance_f", [](double v) { return v > 0.0; }, "must be positive");
    s.require("leakage_w", [](double v) { return v >= 0.0; }, "must be >= 0");
    if (auto c = s.number("capacitance_f")) cap->capacitance_f = *c;
    if (auto l = s.number("leakage_w")) cap->leakage_w = *l;
    if (auto v = s.number("v_activate")) cap->v_activate = *v;
    if (auto v = s.number("v_cutoff")) cap->v_cutoff = *v;
    if (auto v = s.number("v_floor")) cap->v_floor = *v;
  } else {
    s.require("quiescent_w", [](double v) { return v >= 0.0; }, "must be >= 0");
    if (auto q = s.number("quiescent_w")) std::get<harvester::BatteryAssisted>(cfg.converter).quiescent_w = *q;
  }
  s.reject_unused();
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ConfigError("line " + std::to_string(s.line()) + ": [" + s.label() + "]: " + e.what());
  }
  sc.harvesters.push_back(std::move(h));
}

inline void load_mac(const config::Section& s, Scenario& sc) {
  auto us = [&](std::string_view key, mac::SimTime& field) {
    if (auto v = s.number(key)) {
      if (!(*v > 0.0)) s.fail_key(key, "must be positive");
      field = router::us_to_ns(*v);
    }
  };
  us("slot_us", sc.mac.slot);
  us("sifs_us", sc.mac.sifs);
  us("difs_us", sc.mac.difs);
  us("phy_overhead_us", sc.mac.phy_overhead);
  us("ack_airtime_us", sc.mac.ack_airtime);
  if (auto v = s.integer("cw_min")) sc.mac.cw_min = static_cast<int>(*v);
  if (auto v = s.integer("cw_max")) sc.mac.cw_max = static_cast<int>(*v);
  if (auto v = s.integer("retry_limit")) sc.mac.retry_limit = static_cast<int>(*v);
  s.reject_unused();
  try {
    sc.mac.validate();
  } catch (const mac::ConfigError& e) {
    throw ConfigError("line " + std::to_string(s.line()) + ": [mac]: " + e.what());
  }
}

}  // namespace detail

inline Scenario parse_scenario(std::istream& is) {
  const config::Document doc = config::parse(is);
  Scenario sc;
  detail::load_root(doc.root, sc);
  // The router section fixes the internet channel that client defaults use.
  for (const auto& s : doc.sections)
    if (s.type() == "router") detail::load_router(s, sc);
  for (const auto& s : doc.sections) {
    if (s.type() == "router") continue;
    if (s.type() == "station")
      detail::load_station(s, sc);
    else if (s.type() == "harvester")
      detail::load_harvester(s, sc);
    else if (s.type() == "mac")
      detail::load_mac(s, sc);
    else
      throw ConfigError("line " + std::to_string(s.line()) + ": unknown section [" + s.type() + "]");
  }
  try {
    sc.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const mac::ConfigError& e) {
    throw ConfigError(e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  try {
    return parse_scenario(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Station assembly

inline std::vector<mac::StationSpec> build_stations(const Scenario& sc) {
  std::vector<mac::StationSpec> out;
  for (const auto& cp : sc.router.channel_policies()) {
    mac::StationSpec st{std::string(kRouterId), cp.channel, {}};
    if (sc.router.beacons) st.flows.push_back(router::beacon_flow());
    if (cp.channel == sc.router.internet_channel) {
      for (const auto& s : sc.stations)
        if (s.role == Role::client && s.traffic)
          st.flows.push_back(router::traffic_flow(s.id, mac::FrameKind::client_data, *s.traffic));
    }
    if (cp.policy) st.flows.push_back(router::power_flow(*cp.policy));
    out.push_back(std::move(st));
  }
  for (const auto& s : sc.stations) {
    if (s.role != Role::neighbor_ap) continue;
    mac::StationSpec st{s.id, s.channel, {}};
    if (s.beacons) st.flows.push_back(router::beacon_flow());
    if (s.traffic) st.flows.push_back(router::traffic_flow(s.id, mac::FrameKind::neighbor_data, *s.traffic));
    out.push_back(std::move(st));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct OccupancyRow {
  double t_ms;
  std::array<double, 3> per_channel;
  double cumulative;
};

struct ThroughputSeries {
  std::string flow;  // station/kind/chN
  std::vector<double> mbps;
  double mean_mbps = 0.0;
};

struct HarvesterReport {
  std::string id;
  std::array<double, 3> rx_dbm{};
  harvester::HarvesterState state;
  double duration_s = 0.0;
  double mean_dc_w = 0.0;
  double update_rate_hz = 0.0;
  double mean_inter_event_s = 0.0;  // infinity when fewer than two fires
};

struct ReportSet {
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  std::string scheme;
  double bin_ms = 500.0;
  std::vector<OccupancyRow> occupancy;
  std::array<double, 3> occupancy_mean{};
  double cumulative_mean = 0.0;
  std::vector<ThroughputSeries> throughput;
  std::vector<HarvesterReport> harvesters;
  mac::MacRun mac;

  const ThroughputSeries* series(std::string_view flow) const {
    for (const auto& s : throughput)
      if (s.flow == flow) return &s;
    return nullptr;
  }
  const mac::FlowStats* flow_stats(std::string_view station, std::string_view flow) const {
    for (const auto& f : mac.flows)
      if (f.station == station && f.flow == flow) return &f;
    return nullptr;
  }
  const HarvesterReport* harvester(std::string_view id) const {
    for (const auto& h : harvesters)
      if (h.id == id) return &h;
    return nullptr;
  }
};

inline std::size_t channel_slot(int channel) {
  switch (channel) {
    case 1: return 0;
    case 6: return 1;
    case 11: return 2;
  }
  throw DomainError("channel must be 1, 6 or 11");
}

struct DcSegment {
  double dt_s;
  double p_w;
};

// Rectified power seen by one harvester as a piecewise-constant timeline over
// the MAC run. Router emissions on the three channels superpose at the
// rectifier. With bin_us > 0 segments are energy-averaged into bins.
inline std::vector<DcSegment> dc_timeline(const std::vector<mac::ChannelTrace>& traces, double duration_us,
                                          const std::array<PowerDbm, 3>& rx, const harvester::HarvesterConfig& cfg,
                                          double bin_us) {
  std::array<double, 8> p_for_mask{};
  for (unsigned mask = 1; mask < 8; ++mask) {
    std::array<bool, 3> busy{};
    PowerDbm p_in = PowerDbm::silence();
    for (std::size_t c = 0; c < 3; ++c) busy[c] = (mask >> c) & 1u;
    if (cfg.multichannel_summation) {
      p_in = harvester::incident_power(busy, rx);
    } else {
      for (std::size_t c = 0; c < 3; ++c)
        if (busy[c] && (p_in.is_silent() || rx[c] > p_in)) p_in = rx[c];
    }
    p_for_mask[mask] = cfg.delivered_dc_w(p_in);
  }

  struct Edge {
    double t;
    int delta;
    std::size_t ch;
  };
  std::vector<Edge> edges;
  for (const auto& tr : traces) {
    const std::size_t slot = channel_slot(tr.channel);
    for (const auto& r : tr.records) {
      if (r.frame.station != kRouterId) continue;
      const double end = std::min(r.t_start_us + r.busy_time_us, duration_us);
      if (end <= r.t_start_us) continue;
      edges.push_back({r.t_start_us, +1, slot});
      edges.push_back({end, -1, slot});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.delta < b.delta;
  });

  // Exact segments in microseconds.
  std::vector<std::pair<double, double>> exact;  // (length_us, p_w)
  std::array<int, 3> active{};
  double t = 0.0;
  auto emit = [&](double until) {
    if (until <= t) return;
    unsigned mask = 0;
    for (std::size_t c = 0; c < 3; ++c)
      if (active[c] > 0) mask |= 1u << c;
    const double p = p_for_mask[mask];
    if (!exact.empty() && exact.back().second == p)
      exact.back().first += until - t;
    else
      exact.emplace_back(until - t, p);
    t = until;
  };
  for (const auto& e : edges) {
    emit(e.t);
    active[e.ch] += e.delta;
  }
  emit(duration_us);

  std::vector<DcSegment> out;
  auto push = [&](double len_us, double p) {
    if (len_us <= 0.0) return;
    if (!out.empty() && out.back().p_w == p)
      out.back().dt_s += len_us * 1e-6;
    else
      out.push_back({len_us * 1e-6, p});
  };
  if (bin_us <= 0.0) {
    for (const auto& [len, p] : exact) push(len, p);
    return out;
  }
  const auto bins = static_cast<std::size_t>(std::ceil(duration_us / bin_us - 1e-9));
  std::vector<double> energy(bins, 0.0);  // W*us
  double cursor = 0.0;
  for (const auto& [len, p] : exact) {
    double a = cursor;
    const double b = cursor + len;
    while (a < b) {
      const auto k = std::min(static_cast<std::size_t>(a / bin_us), bins - 1);
      const double edge = std::min(b, static_cast<double>(k + 1) * bin_us);
      const double span = std::max(edge - a, 0.0);
      energy[k] += p * span;
      if (edge <= a) break;
      a = edge;
    }
    cursor = b;
  }
  for (std::size_t k = 0; k < bins; ++k) {
    const double len = std::min(bin_us, duration_us - static_cast<double>(k) * bin_us);
    push(len, len > 0.0 ? energy[k] / len : 0.0);
  }
  return out;
}

// Drives one harvester for `seconds`, replaying the MAC-period timeline.
inline harvester::HarvesterState drive_harvester(const std::vector<DcSegment>& timeline,
                                                 const harvester::HarvesterConfig& cfg, double seconds) {
  auto state = harvester::HarvesterState::initial(cfg);
  double period = 0.0;
  for (const auto& s : timeline) period += s.dt_s;
  if (timeline.empty() || !(period > 0.0)) return state;
  double remaining = seconds;
  while (remaining > 0.0) {
    for (const auto& seg : timeline) {
      const double dt = std::min(seg.dt_s, remaining);
      if (dt > 0.0) harvester::advance_dc(state, seg.p_w, dt, cfg);
      remaining -= dt;
      if (remaining <= 1e-15) {
        remaining = 0.0;
        break;
      }
    }
  }
  return state;
}

inline ReportSet run(const Scenario& sc) {
  sc.validate();
  const auto stations = build_stations(sc);
  const auto duration_ns = static_cast<mac::SimTime>(std::llround(sc.duration_s * mac::kNsPerSec));
  ReportSet rep;
  rep.duration_s = sc.duration_s;
  rep.seed = sc.seed;
  rep.scheme = std::string(router::to_string(sc.router.scheme.kind));
  rep.bin_ms = sc.bin_ms;
  rep.mac = mac::run_mac(stations, duration_ns, sc.mac, sc.seed);
  const double duration_us = sc.duration_s * 1e6;

  // Router occupancy per channel.
  std::array<const mac::ChannelTrace*, 3> by_slot{};
  for (const auto& t : rep.mac.traces) by_slot[channel_slot(t.channel)] = &t;
  for (std::size_t c = 0; c < 3; ++c)
    rep.occupancy_mean[c] = by_slot[c] ? mac::occupancy(*by_slot[c], {0.0, duration_us}, kRouterId) : 0.0;
  rep.cumulative_mean = rep.occupancy_mean[0] + rep.occupancy_mean[1] + rep.occupancy_mean[2];

  const double bin_us = sc.bin_ms * 1e3;
  const auto bins = static_cast<std::size_t>(std::ceil(duration_us / bin_us - 1e-9));
  for (std::size_t k = 0; k < bins; ++k) {
    const mac::Window w{static_cast<double>(k) * bin_us, std::min(duration_us, static_cast<double>(k + 1) * bin_us)};
    OccupancyRow row{w.t0_us / 1e3, {}, 0.0};
    for (std::size_t c = 0; c < 3; ++c) {
      row.per_channel[c] = by_slot[c] ? mac::occupancy(*by_slot[c], w, kRouterId) : 0.0;
      row.cumulative += row.per_channel[c];
    }
    rep.occupancy.push_back(row);
  }

  std::set<std::string> seen;
  for (const auto& f : rep.mac.flows) {
    if (f.kind == mac::FrameKind::beacon) continue;
    const std::string label = f.station + "/" + std::string(mac::to_string(f.kind)) + "/ch" + std::to_string(f.channel);
    if (!seen.insert(label).second) continue;
    const auto* tr = rep.mac.trace_for(f.channel);
    ThroughputSeries s{label, router::throughput_series(*tr, {f.station, f.kind}, sc.bin_ms)};
    s.mean_mbps = router::mean(s.mbps);
    rep.throughput.push_back(std::move(s));
  }

  const PowerDbm eirp = fcc::effective_eirp(sc.router.plan);
  for (const auto& h : sc.harvesters) {
    HarvesterReport hr;
    hr.id = h.id;
    std::array<PowerDbm, 3> rx;
    for (std::size_t c = 0; c < 3; ++c) {
      const int ch = mac::kChannels[c];
      rx[c] = rf::received_power(eirp, h.g_rx, h.link(ch));
      hr.rx_dbm[c] = rx[c].value;
    }
    const auto timeline = dc_timeline(rep.mac.traces, duration_us, rx, h.cfg, sc.harvester_bin_us);
    hr.duration_s = sc.harvest_seconds();
    hr.state = drive_harvester(timeline, h.cfg, hr.duration_s);
    hr.mean_dc_w = hr.state.energy_harvested_j / hr.duration_s;
    hr.update_rate_hz = static_cast<double>(hr.state.fires) / hr.duration_s;
    hr.mean_inter_event_s = hr.state.mean_inter_fire_s();
    rep.harvesters.push_back(std::move(hr));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Output

inline std::string fmt(double v, const char* spec = "%.6f") {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// Numeric summary metrics in a stable order.
inline std::vector<std::pair<std::string, double>> metrics(const ReportSet& r) {
  std::vector<std::pair<std::string, double>> m;
  m.emplace_back("occupancy_ch1_mean", r.occupancy_mean[0]);
  m.emplace_back("occupancy_ch6_mean", r.occupancy_mean[1]);
  m.emplace_back("occupancy_ch11_mean", r.occupancy_mean[2]);
  m.emplace_back("cumulative_occupancy_mean", r.cumulative_mean);
  for (const auto& s : r.throughput) m.emplace_back("throughput_mean_mbps." + s.flow, s.mean_mbps);
  for (const auto& f : r.mac.flows) {
    const std::string base = "flow." + f.station + ".ch" + std::to_string(f.channel) + "." + f.flow;
    m.emplace_back(base + ".offered", static_cast<double>(f.offered));
    m.emplace_back(base + ".delivered", static_cast<double>(f.delivered));
    m.emplace_back(base + ".gate_drops", static_cast<double>(f.gate_drops));
    m.emplace_back(base + ".lost", static_cast<double>(f.lost));
    if (!f.burst_completion_ms.empty())
      m.emplace_back(base + ".burst_completion_mean_ms", router::mean(f.burst_completion_ms));
  }
  for (const auto& h : r.harvesters) {
    const std::string base = "harvester." + h.id;
    m.emplace_back(base + ".boots", static_cast<double>(h.state.boots));
    m.emplace_back(base + ".sensor_fires", static_cast<double>(h.state.fires));
    m.emplace_back(base + ".brown_outs", static_cast<double>(h.state.brown_outs));
    m.emplace_back(base + ".first_boot_s", h.state.first_boot_s);
    m.emplace_back(base + ".update_rate_hz", h.update_rate_hz);
    m.emplace_back(base + ".mean_inter_event_s", h.mean_inter_event_s);
    m.emplace_back(base + ".mean_dc_w", h.mean_dc_w);
    m.emplace_back(base + ".energy_harvested_j", h.state.energy_harvested_j);
    for (std::size_t c = 0; c < 3; ++c)
      m.emplace_back(base + ".rx_dbm_ch" + std::to_string(mac::kChannels[c]), h.rx_dbm[c]);
  }
  return m;
}

inline double metric(const ReportSet& r, std::string_view key) {
  for (const auto& [k, v] : metrics(r))
    if (k == key) return v;
  throw std::out_of_range("no metric '" + std::string(key) + "'");
}

inline void write_occupancy_csv(std::ostream& os, const ReportSet& r) {
  os << "t_ms,ch1,ch6,ch11,cumulative\n";
  for (const auto& row : r.occupancy)
    os << fmt(row.t_ms, "%.3f") << ',' << fmt(row.per_channel[0]) << ',' << fmt(row.per_channel[1]) << ','
       << fmt(row.per_channel[2]) << ',' << fmt(row.cumulative) << '\n';
}

inline void write_throughput_csv(std::ostream& os, const ReportSet& r) {
  os << "t_ms,flow,mbps\n";
  for (const auto& s : r.throughput)
    for (std::size_t k = 0; k < s.mbps.size(); ++k)
      os << fmt(static_cast<double>(k) * r.bin_ms, "%.3f") << ',' << s.flow << ',' << fmt(s.mbps[k]) << '\n';
}

inline void write_harvester_csv(std::ostream& os, const ReportSet& r) {
  os << "t_s,id,v_store,event\n";
  for (const auto& h : r.harvesters)
    for (const auto& e : h.state.event_log)
      os << fmt(e.t_s, "%.6f") << ',' << h.id << ',' << fmt(e.v_store, "%.4f") << ',' << harvester::to_string(e.kind)
         << '\n';
}

inline void write_summary(std::ostream& os, const ReportSet& r) {
  os << "scheme=" << r.scheme << '\n' << "seed=" << r.seed << '\n' << "duration_s=" << fmt(r.duration_s, "%g") << '\n';
  for (const auto& [k, v] : metrics(r)) os << k << '=' << fmt(v, "%.9g") << '\n';
  for (const auto& h : r.harvesters)
    if (h.state.events_dropped > 0)
      os << "harvester." << h.id << ".events_not_logged=" << h.state.events_dropped << '\n';
}

inline void write_reports(const std::filesystem::path& dir, const ReportSet& r) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("occupancy.csv");
    write_occupancy_csv(f, r);
  }
  {
    auto f = open("throughput.csv");
    write_throughput_csv(f, r);
  }
  {
    auto f = open("harvester.csv");
    write_harvester_csv(f, r);
  }
  {
    auto f = open("summary.txt");
    write_summary(f, r);
  }
  {
    auto f = open("trace.csv");
    mac::write_trace(f, r.mac.traces);
  }
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepVariable {
  distance,             // feet
  inter_packet_delay,   // microseconds
  udp_target_rate,      // Mbps
  neighbor_rate,        // Mbps
  wall_material,        // name
  neighbor_load,        // Mbps offered by neighbor APs, 0 = silent
  queue_threshold,      // frames
};

inline std::optional<SweepVariable> parse_sweep_variable(std::string_view s) {
  if (s == "distance") return SweepVariable::distance;
  if (s == "inter_packet_delay") return SweepVariable::inter_packet_delay;
  if (s == "udp_target_rate") return SweepVariable::udp_target_rate;
  if (s == "neighbor_rate") return SweepVariable::neighbor_rate;
  if (s == "wall_material") return SweepVariable::wall_material;
  if (s == "neighbor_load") return SweepVariable::neighbor_load;
  if (s == "queue_threshold") return SweepVariable::queue_threshold;
  return std::nullopt;
}

struct SweepSpec {
  SweepVariable variable;
  std::vector<std::string> values;
  int seeds = 1;
};

struct Aggregate {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct SweepRow {
  std::string value;
  std::vector<std::pair<std::string, Aggregate>> metrics;

  double mean(std::string_view key) const {
    for (const auto& [k, a] : metrics)
      if (k == key) return a.mean;
    throw std::out_of_range("no metric '" + std::string(key) + "'");
  }
};

namespace detail {

inline double sweep_number(const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x)) throw ConfigError("sweep value '" + v + "' is not a number");
  return x;
}

}  // namespace detail

inline Scenario apply_sweep_value(Scenario sc, SweepVariable var, const std::string& value) {
  switch (var) {
    case SweepVariable::distance: {
      const double ft = detail::sweep_number(value);
      if (!(ft > 0.0)) throw ConfigError("sweep distance must be positive");
      if (sc.harvesters.empty()) throw ConfigError("distance sweep needs at least one harvester");
      for (auto& h : sc.harvesters) h.distance = Distance::feet(ft);
      break;
    }
    case SweepVariable::inter_packet_delay:
      sc.router.policy.inter_packet_delay_us = detail::sweep_number(value);
      sc.router.policy_overrides.insert("inter_packet_delay_us");
      break;
    case SweepVariable::queue_threshold:
      sc.router.policy.queue_threshold = static_cast<int>(detail::sweep_number(value));
      sc.router.policy_overrides.insert("queue_threshold");
      break;
    case SweepVariable::udp_target_rate: {
      const double mbps = detail::sweep_number(value);
      bool any = false;
      for (auto& s : sc.stations)
        if (s.role == Role::client) {
          router::TrafficGen g = s.traffic.value_or(router::TrafficGen{});
          g.rate_mbps = s.rate_mbps;
          g.kind = router::UdpCbr{mbps};
          s.traffic = g;
          any = true;
        }
      if (!any) throw ConfigError("udp_target_rate sweep needs at least one client station");
      break;
    }
    case SweepVariable::neighbor_rate: {
      const double rate = detail::sweep_number(value);
      if (!mac::is_valid_rate(rate)) throw ConfigError("neighbor rate '" + value + "' is not a supported rate");
      for (auto& s : sc.stations)
        if (s.role == Role::neighbor_ap) {
          s.rate_mbps = rate;
          if (s.traffic) s.traffic->rate_mbps = rate;
        }
      if (sc.router.scheme.kind == router::SchemeKind::EqualShare) sc.router.scheme.equal_share_rate_mbps = rate;
      break;
    }
    case SweepVariable::wall_material: {
      const auto wall = rf::parse_wall(value);
      if (!wall) throw ConfigError("unknown wall material '" + value + "'");
      for (auto& h : sc.harvesters) h.wall = *wall;
      break;
    }
    case SweepVariable::neighbor_load: {
      const double mbps = detail::sweep_number(value);
      for (auto& s : sc.stations)
        if (s.role == Role::neighbor_ap) {
          if (mbps <= 0.0) {
            s.traffic.reset();
          } else {
            router::TrafficGen g = s.traffic.value_or(router::TrafficGen{});
            g.rate_mbps = s.rate_mbps;
            g.kind = router::UdpCbr{mbps};
            s.traffic = g;
          }
        }
      break;
    }
  }
  sc.validate();
  return sc;
}

// One run per (value, seed); seeds are base, base+1, ... Rows keep the order
// of `spec.values` regardless of which point finishes first.
inline std::vector<SweepRow> sweep(const Scenario& base, const SweepSpec& spec, unsigned max_parallel = 0) {
  if (spec.values.empty()) throw ConfigError("sweep needs at least one value");
  if (spec.seeds < 1) throw ConfigError("sweep needs at least one seed");
  std::vector<Scenario> points;
  for (const auto& v : spec.values) points.push_back(apply_sweep_value(base, spec.variable, v));

  auto run_point = [&spec](Scenario sc) {
    std::vector<std::vector<std::pair<std::string, double>>> per_seed;
    const std::uint64_t seed0 = sc.seed;
    for (int k = 0; k < spec.seeds; ++k) {
      sc.seed = seed0 + static_cast<std::uint64_t>(k);
      per_seed.push_back(metrics(run(sc)));
    }
    return per_seed;
  };

  if (max_parallel == 0) max_parallel = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::vector<std::vector<std::pair<std::string, double>>>> results(points.size());
  for (std::size_t start = 0; start < points.size(); start += max_parallel) {
    std::vector<std::future<std::vector<std::vector<std::pair<std::string, double>>>>> batch;
    const std::size_t end = std::min(points.size(), start + max_parallel);
    for (std::size_t i = start; i < end; ++i) batch.push_back(std::async(std::launch::async, run_point, points[i]));
    for (std::size_t i = start; i < end; ++i) results[i] = batch[i - start].get();
  }

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    SweepRow row{spec.values[i], {}};
    const auto& runs = results[i];
    for (std::size_t m = 0; m < runs.front().size(); ++m) {
      Aggregate a{0.0, runs.front()[m].second, runs.front()[m].second};
      for (const auto& r : runs) {
        const double v = m < r.size() ? r[m].second : 0.0;
        a.mean += v;
        a.min = std::min(a.min, v);
        a.max = std::max(a.max, v);
      }
      a.mean /= static_cast<double>(runs.size());
      row.metrics.emplace_back(runs.front()[m].first, a);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& os, std::string_view variable, const std::vector<SweepRow>& rows) {
  os << variable << ",metric,mean,min,max\n";
  for (const auto& r : rows)
    for (const auto& [k, a] : r.metrics)
      os << r.value << ',' << k << ',' << fmt(a.mean, "%.9g") << ',' << fmt(a.min, "%.9g") << ',' << fmt(a.max, "%.9g")
         << '\n';
}

// ---------------------------------------------------------------------------
// Trace analysis

struct OccupancyReport {
  mac::Window window{0.0, 0.0};
  std::vector<std::pair<int, double>> per_channel;
  double cumulative = 0.0;
};

inline OccupancyReport analyze_trace(std::istream& is, std::optional<mac::Window> window = std::nullopt,
                                     std::optional<std::string> station = std::nullopt) {
  const mac::ImportedTrace imp = mac::read_trace(is);
  OccupancyReport rep;
  rep.window = window.value_or(mac::Window{0.0, imp.declared_duration_us.value_or(imp.last_end_us)});
  std::optional<std::string_view> filter;
  if (station) filter = *station;
  for (const auto& t : imp.traces) {
    const double o = mac::occupancy(t, rep.window, filter);
    rep.per_channel.emplace_back(t.channel, o);
    rep.cumulative += o;
  }
  return rep;
}

inline OccupancyReport analyze_trace(const std::filesystem::path& path, std::optional<mac::Window> window = std::nullopt,
                                     std::optional<std::string> station = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace '" + path.string() + "'");
  return analyze_trace(in, window, std::move(station));
}

}  // namespace powifi::scenario
