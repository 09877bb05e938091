#pragma once

// Behavioral model of the multi-channel RF harvester: a rectifier curve, a
// DC-DC front end (cold start or battery assisted), a storage element with
// leakage, and a sensor load that fires from stored energy.

#include "powifi/fcc.hpp"
#include "powifi/rf.hpp"
#include "powifi/units.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace powifi::harvester {

inline constexpr std::size_t kChannels = 3;

// ---------------------------------------------------------------------------
// Rectifier

struct RectifierAnchor {
  PowerDbm p_in;
  double p_out_w;
};

struct RectifierCurve {
  PowerDbm sensitivity;
  std::vector<RectifierAnchor> anchors;
  Decibels matching_loss{0.0};

  void validate() const {
    if (anchors.empty()) throw DomainError("rectifier curve needs at least one anchor");
    if (matching_loss.value < 0.0) throw DomainError("matching loss must be >= 0 dB");
    if (sensitivity < anchors.front().p_in)
      throw DomainError("sensitivity must not lie below the first anchor");
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      const auto& a = anchors[i];
      if (!(a.p_out_w > 0.0)) throw DomainError("anchor output power must be positive");
      if (a.p_out_w > dbm_to_mw(a.p_in).watts())
        throw DomainError("anchor efficiency exceeds 1");
      if (i > 0) {
        if (!(anchors[i - 1].p_in < a.p_in)) throw DomainError("anchors must be sorted by input power");
        if (a.p_out_w < anchors[i - 1].p_out_w) throw DomainError("anchor output must be non-decreasing");
      }
    }
  }

  // Endpoints are the measured sensitivities; the interior is calibrated.
  static RectifierCurve battery_free() {
    return RectifierCurve{PowerDbm{-17.8},
                          {{PowerDbm{-17.8}, 1e-6},
                           {PowerDbm{-10.0}, 10e-6},
                           {PowerDbm{0.0}, 200e-6},
                           {PowerDbm{10.0}, 3e-3}}};
  }

  static RectifierCurve battery_charging() {
    return RectifierCurve{PowerDbm{-19.3},
                          {{PowerDbm{-19.3}, 1e-6},
                           {PowerDbm{-10.0}, 10e-6},
                           {PowerDbm{0.0}, 200e-6},
                           {PowerDbm{10.0}, 3e-3}}};
  }
};

struct RectifierOutput {
  double p_dc_w = 0.0;
  double v_oc = 0.0;
};

// Open-circuit voltage that the cold-start converter needs; the curve's
// sensitivity is pinned to produce exactly this.
inline constexpr double kColdStartVoltage = 0.300;

inline double interpolate_output_w(PowerDbm p, const RectifierCurve& curve) {
  const auto& a = curve.anchors;
  if (p <= a.front().p_in) return a.front().p_out_w;
  if (p >= a.back().p_in) {
    const double eff = a.back().p_out_w / dbm_to_mw(a.back().p_in).watts();
    return eff * dbm_to_mw(p).watts();
  }
  auto hi = std::upper_bound(a.begin(), a.end(), p,
                             [](PowerDbm v, const RectifierAnchor& x) { return v < x.p_in; });
  auto lo = hi - 1;
  const double frac = (p.value - lo->p_in.value) / (hi->p_in.value - lo->p_in.value);
  const double log_out = std::log10(lo->p_out_w) + frac * (std::log10(hi->p_out_w) - std::log10(lo->p_out_w));
  return std::pow(10.0, log_out);
}

inline RectifierOutput rectifier_output(PowerDbm p_in, const RectifierCurve& curve) {
  if (p_in.is_silent()) return {};
  const PowerDbm p = p_in - curve.matching_loss;
  if (p < curve.sensitivity) return {};
  const double p_dc = interpolate_output_w(p, curve);
  const double p_at_sensitivity = interpolate_output_w(curve.sensitivity, curve);
  return {p_dc, kColdStartVoltage * std::sqrt(p_dc / p_at_sensitivity)};
}

// ---------------------------------------------------------------------------
// DC-DC converter, storage, load

struct ColdStart {
  double min_input_v = 0.300;
  double boot_v = 2.400;
};

struct BatteryAssisted {
  double mppt_ref_v = 0.200;
  double quiescent_w = 0.5e-6;
};

using DcDcConverter = std::variant<ColdStart, BatteryAssisted>;

struct Capacitor {
  double capacitance_f = 100e-6;
  double v_floor = 0.0;
  double v_activate = 2.4;
  double v_cutoff = 1.9;
  double leakage_w = 0.5e-6;

  double energy_at(double v) const { return 0.5 * capacitance_f * v * v; }
  double voltage_at(double e) const { return std::sqrt(std::max(0.0, 2.0 * e / capacitance_f)); }
  double usable_energy() const { return energy_at(v_activate) - energy_at(v_cutoff); }
};

struct Battery {
  double voltage = 2.4;
  double capacity_j = 6480.0;
  double initial_fraction = 0.5;
};

using StorageElement = std::variant<Capacitor, Battery>;

struct SensorLoad {
  std::string name = "temperature";
  double e_op_j = 2.77e-6;
  double v_min = 1.9;
  double boot_time_s = 0.002;
};

struct HarvesterConfig {
  RectifierCurve curve = RectifierCurve::battery_free();
  DcDcConverter converter = ColdStart{};
  StorageElement storage = Capacitor{};
  SensorLoad load{};
  // Let simultaneous transmissions on several channels add at the rectifier.
  // Off: the strongest busy channel alone drives the rectifier.
  bool multichannel_summation = false;

  bool battery_assisted() const { return std::holds_alternative<BatteryAssisted>(converter); }

  void validate() const {
    curve.validate();
    if (!(load.e_op_j > 0.0)) throw DomainError("load energy per operation must be positive");
    if (auto* c = std::get_if<Capacitor>(&storage)) {
      if (!(c->capacitance_f > 0.0)) throw DomainError("capacitance must be positive");
      if (!(c->v_floor <= c->v_cutoff && c->v_cutoff < c->v_activate))
        throw DomainError("capacitor thresholds must satisfy v_floor <= v_cutoff < v_activate");
      if (c->leakage_w < 0.0) throw DomainError("leakage must be >= 0");
    } else {
      const auto& b = std::get<Battery>(storage);
      if (!(b.capacity_j > 0.0) || !(b.voltage > 0.0)) throw DomainError("battery needs positive voltage and capacity");
      if (b.initial_fraction < 0.0 || b.initial_fraction > 1.0) throw DomainError("battery initial fraction must be in [0, 1]");
    }
    if (auto* cs = std::get_if<ColdStart>(&converter)) {
      if (auto* c = std::get_if<Capacitor>(&storage); c && cs->boot_v > c->v_activate)
        throw DomainError("cold-start boot voltage exceeds storage activation voltage");
    }
  }

  // Rectifier DC power after converter gating: in cold-start mode nothing is
  // transferred while the rectifier cannot reach the converter's minimum input.
  double delivered_dc_w(PowerDbm p_in) const {
    const RectifierOutput r = rectifier_output(p_in, curve);
    if (auto* cs = std::get_if<ColdStart>(&converter)) {
      if (r.v_oc < cs->min_input_v) return 0.0;
    } else if (r.v_oc < std::get<BatteryAssisted>(converter).mppt_ref_v) {
      return 0.0;
    }
    return r.p_dc_w;
  }

  double standing_drain_w() const {
    if (auto* c = std::get_if<Capacitor>(&storage)) return c->leakage_w;
    return std::get<BatteryAssisted>(converter).quiescent_w;
  }

  static HarvesterConfig temperature_battery_free() {
    HarvesterConfig cfg;
    cfg.curve = RectifierCurve::battery_free();
    cfg.converter = ColdStart{};
    cfg.storage = Capacitor{100e-6, 0.0, 2.4, 1.9, 0.5e-6};
    cfg.load = SensorLoad{"temperature", 2.77e-6, 1.9, 0.002};
    return cfg;
  }

  // Two AAA 750 mAh NiMH cells at 2.4 V.
  static HarvesterConfig temperature_battery() {
    HarvesterConfig cfg;
    cfg.curve = RectifierCurve::battery_charging();
    cfg.converter = BatteryAssisted{};
    cfg.storage = Battery{2.4, 0.750 * 3600.0 * 2.4, 0.5};
    cfg.load = SensorLoad{"temperature", 2.77e-6, 1.9, 0.002};
    return cfg;
  }

  static HarvesterConfig camera_battery_free() {
    HarvesterConfig cfg;
    cfg.curve = RectifierCurve::battery_free();
    cfg.converter = ColdStart{};
    cfg.storage = Capacitor{6.8e-3, 0.0, 3.1, 2.4, 0.5e-6};
    cfg.load = SensorLoad{"camera", 10.4e-3, 2.4, 0.002};
    return cfg;
  }

  // 1 mAh Li-ion coin cell at 3.0 V.
  static HarvesterConfig camera_battery() {
    HarvesterConfig cfg;
    cfg.curve = RectifierCurve::battery_charging();
    cfg.converter = BatteryAssisted{};
    cfg.storage = Battery{3.0, 0.001 * 3600.0 * 3.0, 0.5};
    cfg.load = SensorLoad{"camera", 10.4e-3, 2.4, 0.002};
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// State and stepping

enum class EventKind { boot, sensor_fire, brown_out };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::boot: return "boot";
    case EventKind::sensor_fire: return "sensor_fire";
    case EventKind::brown_out: return "brown_out";
  }
  return "?";
}

struct HarvesterEvent {
  double t_s;
  EventKind kind;
  double v_store;
};

struct HarvesterState {
  double t_s = 0.0;
  double energy_j = 0.0;  // stored
  double v_store = 0.0;
  bool booted = false;
  double fire_credit_j = 0.0;  // battery mode: net harvest not yet spent on operations

  // Full log up to `log_limit`; counters keep going past it.
  std::vector<HarvesterEvent> event_log;
  std::size_t log_limit = 200'000;
  std::size_t events_dropped = 0;
  std::uint64_t boots = 0;
  std::uint64_t fires = 0;
  std::uint64_t brown_outs = 0;
  double first_boot_s = -1.0;
  double first_fire_s = -1.0;
  double last_fire_s = -1.0;

  double energy_harvested_j = 0.0;
  double energy_consumed_j = 0.0;
  double energy_leaked_j = 0.0;
  double energy_spilled_j = 0.0;  // discarded at a full store
  double initial_energy_j = 0.0;

  static HarvesterState initial(const HarvesterConfig& cfg) {
    HarvesterState s;
    if (auto* b = std::get_if<Battery>(&cfg.storage)) {
      s.energy_j = b->capacity_j * b->initial_fraction;
      s.v_store = b->voltage;
      s.booted = true;
    } else {
      const auto& c = std::get<Capacitor>(cfg.storage);
      s.energy_j = c.energy_at(c.v_floor);
      s.v_store = c.v_floor;
    }
    s.initial_energy_j = s.energy_j;
    return s;
  }

  double mean_inter_fire_s() const {
    if (fires < 2) return std::numeric_limits<double>::infinity();
    return (last_fire_s - first_fire_s) / static_cast<double>(fires - 1);
  }
};

namespace detail {

inline void log_event(HarvesterState& s, double t, EventKind kind) {
  switch (kind) {
    case EventKind::boot:
      ++s.boots;
      if (s.first_boot_s < 0.0) s.first_boot_s = t;
      break;
    case EventKind::sensor_fire:
      ++s.fires;
      if (s.first_fire_s < 0.0) s.first_fire_s = t;
      s.last_fire_s = t;
      break;
    case EventKind::brown_out: ++s.brown_outs; break;
  }
  if (s.event_log.size() < s.log_limit)
    s.event_log.push_back({t, kind, s.v_store});
  else
    ++s.events_dropped;
}

inline void advance_capacitor(HarvesterState& s, double p, double dt, const Capacitor& cap,
                              const SensorLoad& load) {
  const double e_max = cap.energy_at(cap.v_activate);
  const double e_cut = cap.energy_at(cap.v_cutoff);
  const double e_floor = cap.energy_at(cap.v_floor);
  const double leak = cap.leakage_w;
  const double net = p - leak;
  double t = s.t_s;
  double remaining = dt;

  auto run_for = [&](double span, double leak_rate) {
    s.energy_harvested_j += p * span;
    s.energy_leaked_j += leak_rate * span;
    s.energy_j += (p - leak_rate) * span;
    t += span;
    remaining -= span;
  };

  while (remaining > 0.0) {
    if (net > 0.0) {
      if (s.energy_j < e_max) {
        const double to_full = (e_max - s.energy_j) / net;
        if (to_full > remaining) {
          run_for(remaining, leak);
          break;
        }
        run_for(to_full, leak);
        s.energy_j = e_max;
      }
      s.v_store = cap.v_activate;
      if (!s.booted) {
        s.booted = true;
        log_event(s, t, EventKind::boot);
      }
      if (s.energy_j - e_cut >= load.e_op_j && s.v_store >= load.v_min) {
        s.energy_j -= load.e_op_j;
        s.energy_consumed_j += load.e_op_j;
        s.v_store = cap.voltage_at(s.energy_j);
        log_event(s, t, EventKind::sensor_fire);
        continue;
      }
      // Full and unable to spend: the surplus is lost.
      s.energy_harvested_j += p * remaining;
      s.energy_leaked_j += leak * remaining;
      s.energy_spilled_j += net * remaining;
      t += remaining;
      remaining = 0.0;
    } else {
      if (s.energy_j <= e_floor) {
        // Leakage stops at the floor; whatever arrives leaks away.
        s.energy_harvested_j += p * remaining;
        s.energy_leaked_j += p * remaining;
        t += remaining;
        remaining = 0.0;
        break;
      }
      if (net == 0.0) {
        run_for(remaining, leak);
        break;
      }
      const double drain = -net;
      if (s.booted && s.energy_j > e_cut) {
        const double to_cut = (s.energy_j - e_cut) / drain;
        if (to_cut <= remaining) {
          run_for(to_cut, leak);
          s.energy_j = e_cut;
          s.v_store = cap.v_cutoff;
          s.booted = false;
          log_event(s, t, EventKind::brown_out);
          continue;
        }
      }
      const double to_floor = (s.energy_j - e_floor) / drain;
      if (to_floor > remaining) {
        run_for(remaining, leak);
        break;
      }
      run_for(to_floor, leak);
      s.energy_j = e_floor;
    }
  }
  s.t_s = s.t_s + dt;
  s.v_store = cap.voltage_at(s.energy_j);
}

inline void advance_battery(HarvesterState& s, double p, double dt, const Battery& bat,
                            const BatteryAssisted& conv, const SensorLoad& load) {
  const double net = p - conv.quiescent_w;
  s.energy_harvested_j += p * dt;
  s.energy_leaked_j += conv.quiescent_w * dt;
  if (net > 0.0 && bat.voltage >= load.v_min) {
    // Energy-neutral operation: fire each time the net harvest covers one op.
    double t = s.t_s;
    double remaining = dt;
    while (s.fire_credit_j + net * remaining >= load.e_op_j) {
      const double to_fire = (load.e_op_j - s.fire_credit_j) / net;
      t += to_fire;
      remaining -= to_fire;
      s.fire_credit_j = 0.0;
      s.energy_consumed_j += load.e_op_j;
      s.energy_j -= load.e_op_j;
      log_event(s, t, EventKind::sensor_fire);
    }
    s.fire_credit_j += net * remaining;
  }
  s.energy_j += net * dt;
  if (s.energy_j > bat.capacity_j) {
    s.energy_spilled_j += s.energy_j - bat.capacity_j;
    s.energy_j = bat.capacity_j;
  } else if (s.energy_j < 0.0) {
    s.energy_spilled_j += s.energy_j;  // deficit the cell could not supply
    s.energy_j = 0.0;
  }
  s.v_store = bat.voltage;
  s.t_s += dt;
}

}  // namespace detail

// Advance by `dt` seconds of constant rectified power `p_dc_w` (already gated).
// Exact within the interval: threshold crossings are solved in closed form.
inline void advance_dc(HarvesterState& s, double p_dc_w, double dt, const HarvesterConfig& cfg) {
  if (!(dt > 0.0)) throw DomainError("harvester step needs dt > 0");
  if (auto* cap = std::get_if<Capacitor>(&cfg.storage))
    detail::advance_capacitor(s, p_dc_w, dt, *cap, cfg.load);
  else
    detail::advance_battery(s, p_dc_w, dt, std::get<Battery>(cfg.storage),
                            std::get<BatteryAssisted>(cfg.converter), cfg.load);
}

inline HarvesterState step(HarvesterState state, PowerDbm p_in, double dt, const HarvesterConfig& cfg) {
  advance_dc(state, cfg.delivered_dc_w(p_in), dt, cfg);
  return state;
}

// ---------------------------------------------------------------------------
// Multi-channel incidence and steady-state analysis

inline PowerDbm incident_power(const std::array<bool, kChannels>& busy,
                               const std::array<PowerDbm, kChannels>& per_channel_rx) {
  double mw = 0.0;
  for (std::size_t c = 0; c < kChannels; ++c)
    if (busy[c]) mw += dbm_to_mw(per_channel_rx[c]).value;
  return mw_to_dbm_or_silence(PowerMw{mw});
}

inline double energy_neutral_update_rate(double p_harvest_w, const SensorLoad& load) {
  if (p_harvest_w < 0.0) throw DomainError("harvested power must be >= 0");
  return p_harvest_w / load.e_op_j;
}

// Per-channel duty cycles seen by the harvester. Busy periods on different
// channels are treated as independent.
struct Illumination {
  std::array<double, kChannels> occupancy{1.0, 0.0, 0.0};
  std::array<int, kChannels> channels{1, 6, 11};
  rf::WallMaterial wall = rf::WallMaterial::none;

  static Illumination single_channel(double occ, int channel = 6) {
    Illumination il;
    il.occupancy = {occ, 0.0, 0.0};
    il.channels = {channel, 1, 11};
    return il;
  }
  static Illumination spread(double cumulative) {
    Illumination il;
    il.occupancy.fill(cumulative / static_cast<double>(kChannels));
    return il;
  }
};

// Expected rectified power at distance d, averaged over which channels are busy.
inline double steady_state_dc_w(PowerDbm eirp, GainDbi g_rx, Distance d, const HarvesterConfig& cfg,
                                const Illumination& il) {
  std::array<PowerDbm, kChannels> rx;
  for (std::size_t c = 0; c < kChannels; ++c)
    rx[c] = rf::received_power(eirp, g_rx, {d, rf::channel_center(il.channels[c]), il.wall});

  double expected = 0.0;
  for (unsigned mask = 1; mask < (1u << kChannels); ++mask) {
    double prob = 1.0;
    std::array<bool, kChannels> busy{};
    for (std::size_t c = 0; c < kChannels; ++c) {
      busy[c] = (mask >> c) & 1u;
      prob *= busy[c] ? il.occupancy[c] : 1.0 - il.occupancy[c];
    }
    if (prob <= 0.0) continue;
    PowerDbm p_in = PowerDbm::silence();
    if (cfg.multichannel_summation) {
      p_in = incident_power(busy, rx);
    } else {
      for (std::size_t c = 0; c < kChannels; ++c)
        if (busy[c] && (p_in.is_silent() || rx[c] > p_in)) p_in = rx[c];
    }
    expected += prob * cfg.delivered_dc_w(p_in);
  }
  return expected;
}

inline double steady_state_update_rate(PowerDbm eirp, GainDbi g_rx, Distance d, const HarvesterConfig& cfg,
                                       const Illumination& il) {
  const double net = steady_state_dc_w(eirp, g_rx, d, cfg, il) - cfg.standing_drain_w();
  return net > 0.0 ? energy_neutral_update_rate(net, cfg.load) : 0.0;
}

struct OperatingRange {
  double meters = 0.0;
  double feet() const { return meters / Distance::kMetersPerFoot; }
  bool reachable() const { return meters > 0.0; }
};

// Largest distance at which steady-state harvested power exceeds the standing
// drain (leakage or converter quiescent draw), found by bisection in log-distance.
inline OperatingRange max_operating_range(const fcc::TxPlan& router, GainDbi g_rx, const HarvesterConfig& cfg,
                                          const Illumination& il) {
  cfg.validate();
  const PowerDbm eirp = fcc::effective_eirp(router);
  auto operable = [&](double m) { return steady_state_update_rate(eirp, g_rx, Distance{m}, cfg, il) > 0.0; };

  double lo = 0.01;
  double hi = 1e5;
  if (!operable(lo)) return {};
  if (operable(hi)) return {hi};
  for (int i = 0; i < 200 && hi / lo > 1.0 + 1e-14; ++i) {
    const double mid = std::sqrt(lo * hi);
    (operable(mid) ? lo : hi) = mid;
  }
  return {lo};
}

}  // namespace powifi::harvester
