#pragma once

// Deterministic event-driven CSMA/CA (802.11 DCF) engine for independent
// 2.4 GHz channels, plus the airtime-based occupancy metric computed on its
// frame traces.

#include "powifi/rng.hpp"
#include "powifi/units.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace powifi::mac {

class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Engine clock: integer nanoseconds.
using SimTime = std::int64_t;
inline constexpr SimTime kNsPerUs = 1'000;
inline constexpr SimTime kNsPerMs = 1'000'000;
inline constexpr SimTime kNsPerSec = 1'000'000'000;
inline constexpr SimTime kNever = std::numeric_limits<SimTime>::max();

// 802.11b/g rates plus 16 Mbps, which neighbor-network experiments use.
inline constexpr std::array<double, 13> kRatesMbps = {1, 2, 5.5, 6, 9, 11, 12, 16, 18, 24, 36, 48, 54};
inline constexpr std::array<int, 3> kChannels = {1, 6, 11};

inline bool is_valid_rate(double mbps) {
  return std::find(kRatesMbps.begin(), kRatesMbps.end(), mbps) != kRatesMbps.end();
}

enum class FrameKind { client_data, power_broadcast, beacon, neighbor_data, ack };
enum class Outcome { delivered, collided };

inline std::string_view to_string(FrameKind k) {
  switch (k) {
    case FrameKind::client_data: return "client_data";
    case FrameKind::power_broadcast: return "power_broadcast";
    case FrameKind::beacon: return "beacon";
    case FrameKind::neighbor_data: return "neighbor_data";
    case FrameKind::ack: return "ack";
  }
  return "?";
}

inline std::optional<FrameKind> parse_frame_kind(std::string_view s) {
  for (auto k : {FrameKind::client_data, FrameKind::power_broadcast, FrameKind::beacon,
                 FrameKind::neighbor_data, FrameKind::ack})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::string_view to_string(Outcome o) { return o == Outcome::delivered ? "delivered" : "collided"; }

inline std::optional<Outcome> parse_outcome(std::string_view s) {
  if (s == "delivered") return Outcome::delivered;
  if (s == "collided") return Outcome::collided;
  return std::nullopt;
}

// Broadcasts (power packets, beacons) are never acknowledged or retried.
inline bool is_unicast(FrameKind k) { return k == FrameKind::client_data || k == FrameKind::neighbor_data; }

inline double payload_airtime_us(int size_bytes, double rate_mbps) {
  if (size_bytes < 1) throw DomainError("frame size must be >= 1 byte");
  if (!is_valid_rate(rate_mbps)) throw DomainError("rate " + std::to_string(rate_mbps) + " Mbps is not a supported rate");
  return static_cast<double>(size_bytes) * 8.0 / rate_mbps;
}

struct Frame {
  std::string station;
  int channel = 1;
  int size_bytes = 1500;
  double rate_mbps = 54.0;
  FrameKind kind = FrameKind::client_data;

  void validate() const {
    payload_airtime_us(size_bytes, rate_mbps);
    if (kind != FrameKind::beacon && kind != FrameKind::ack && size_bytes > 1500)
      throw DomainError("data frames are limited to 1500 bytes");
  }
};

struct FrameRecord {
  Frame frame;
  double t_start_us = 0.0;
  double payload_airtime_us = 0.0;
  double busy_time_us = 0.0;
  Outcome outcome = Outcome::delivered;
};

struct ChannelTrace {
  int channel = 1;
  double duration_us = 0.0;
  std::vector<FrameRecord> records;
};

struct Window {
  double t0_us;
  double t1_us;
};

// Sum of payload airtime of frames starting in [t0, t1), over the window
// length. Collided frames count: captures include every attempt.
inline double occupancy(const ChannelTrace& trace, Window w, std::optional<std::string_view> station = std::nullopt) {
  if (!(w.t1_us > w.t0_us)) throw DomainError("occupancy window must have t1 > t0");
  double airtime = 0.0;
  auto first = std::lower_bound(trace.records.begin(), trace.records.end(), w.t0_us,
                                [](const FrameRecord& r, double t) { return r.t_start_us < t; });
  for (auto it = first; it != trace.records.end() && it->t_start_us < w.t1_us; ++it) {
    if (station && it->frame.station != *station) continue;
    airtime += it->payload_airtime_us;
  }
  return airtime / (w.t1_us - w.t0_us);
}

inline double cumulative_occupancy(const std::vector<ChannelTrace>& traces, Window w,
                                   std::optional<std::string_view> station = std::nullopt) {
  double sum = 0.0;
  for (const auto& t : traces) sum += occupancy(t, w, station);
  return sum;
}

// ---------------------------------------------------------------------------
// Parameters

struct MacParams {
  SimTime slot = 9 * kNsPerUs;
  SimTime sifs = 10 * kNsPerUs;
  SimTime difs = 28 * kNsPerUs;
  int cw_min = 15;
  int cw_max = 1023;
  SimTime phy_overhead = 24 * kNsPerUs;
  SimTime ack_airtime = 44 * kNsPerUs;
  int retry_limit = 7;

  void validate() const {
    auto pow2m1 = [](int v) { return v > 0 && ((v + 1) & v) == 0; };
    if (slot <= 0 || sifs <= 0 || difs <= 0 || phy_overhead < 0 || ack_airtime < 0)
      throw ConfigError("MAC timings must be positive");
    if (difs != sifs + 2 * slot) throw ConfigError("difs must equal sifs + 2*slot");
    if (!pow2m1(cw_min) || !pow2m1(cw_max) || cw_min > cw_max)
      throw ConfigError("contention windows must be 2^k-1 with cw_min <= cw_max");
    if (retry_limit < 0) throw ConfigError("retry_limit must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Traffic description

struct Periodic {
  SimTime interval = 100 * kNsPerUs;
  SimTime phase = 0;
  bool random_phase = false;
};

struct Backlogged {};

// Every `period`, `frames` frames arrive paced evenly over `on`.
struct Bursts {
  SimTime on = 50 * kNsPerMs;
  SimTime period = 1000 * kNsPerMs;
  int frames = 50;
};

using Source = std::variant<Periodic, Backlogged, Bursts>;

struct FlowSpec {
  std::string name;
  FrameKind kind = FrameKind::client_data;
  int size_bytes = 1500;
  double rate_mbps = 54.0;
  Source source = Backlogged{};
  std::size_t capacity = 512;
  // Admission check against the station's total queue depth; empty admits all.
  std::function<bool(std::size_t)> admit;
};

struct StationSpec {
  std::string id;
  int channel = 1;
  std::vector<FlowSpec> flows;
};

struct FlowStats {
  std::string station;
  int channel = 1;
  std::string flow;
  FrameKind kind = FrameKind::client_data;
  std::uint64_t offered = 0;
  std::uint64_t gate_drops = 0;
  std::uint64_t tail_drops = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;  // collided broadcasts and unicasts past the retry limit
  std::vector<double> burst_completion_ms{};
};

struct MacRun {
  std::vector<ChannelTrace> traces;  // ascending channel order
  std::vector<FlowStats> flows;

  const ChannelTrace* trace_for(int channel) const {
    for (const auto& t : traces)
      if (t.channel == channel) return &t;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Engine

namespace detail {

struct Pending {
  SimTime arrival;
  int burst = -1;
};

struct FlowRt {
  const FlowSpec* spec;
  std::size_t stats_index;
  std::deque<Pending> queue{};
  bool backlogged = false;
  SimTime next_arrival = kNever;
  // Bursts
  int burst_index = -1;
  int burst_emitted = 0;
  std::map<int, std::pair<SimTime, int>> open_bursts{};  // id -> (start, frames left)

  std::size_t depth() const { return backlogged ? spec->capacity : queue.size(); }
  bool has_frame() const { return backlogged || !queue.empty(); }
};

struct StationRt {
  const StationSpec* spec;
  std::vector<FlowRt> flows;
  Rng rng;
  int cw;
  std::optional<std::int64_t> backoff{};  // slots after the current countdown start
  std::optional<std::size_t> head_flow{};
  int retries = 0;
  std::size_t rr_next = 0;

  std::size_t depth() const {
    std::size_t d = 0;
    for (const auto& f : flows) d += f.depth();
    return d;
  }
  bool has_frame() const {
    for (const auto& f : flows)
      if (f.has_frame()) return true;
    return false;
  }
};

struct InFlight {
  std::size_t station;
  std::size_t flow;
  bool unicast;
};

class ChannelEngine {
public:
  ChannelEngine(int channel, std::vector<const StationSpec*> stations, SimTime duration, const MacParams& params,
                std::uint64_t seed, std::vector<FlowStats>& stats)
      : params_(params), duration_(duration), stats_(stats) {
    trace_.channel = channel;
    trace_.duration_us = static_cast<double>(duration) / kNsPerUs;
    for (const auto* s : stations) {
      StationRt rt{s, {}, Rng(seed, "mac/" + s->id + "/ch" + std::to_string(channel)), params.cw_min};
      for (const auto& f : s->flows) {
        FlowRt fr{&f, stats_.size()};
        stats_.push_back(FlowStats{s->id, channel, f.name, f.kind});
        fr.backlogged = std::holds_alternative<Backlogged>(f.source);
        rt.flows.push_back(std::move(fr));
      }
      stations_.push_back(std::move(rt));
    }
    for (std::size_t si = 0; si < stations_.size(); ++si) {
      auto& st = stations_[si];
      for (std::size_t fi = 0; fi < st.flows.size(); ++fi) {
        auto& fr = st.flows[fi];
        if (const auto* p = std::get_if<Periodic>(&fr.spec->source)) {
          fr.next_arrival = p->random_phase ? static_cast<SimTime>(st.rng.uniform_int(static_cast<std::uint64_t>(p->interval - 1)))
                                            : p->phase;
        } else if (std::holds_alternative<Bursts>(fr.spec->source)) {
          fr.next_arrival = 0;
        }
        if (fr.next_arrival != kNever) arrivals_.push({fr.next_arrival, si, fi});
      }
      if (st.has_frame()) st.backoff = draw_backoff(st);
    }
  }

  ChannelTrace run() {
    while (true) {
      const SimTime t_arr = arrivals_.empty() ? kNever : arrivals_.top().time;
      if (busy_) {
        if (t_arr < busy_end_) {
          process_arrival();
          continue;
        }
        if (busy_end_ >= duration_) break;
        finish_transmission();
        continue;
      }
      const SimTime t_exp = next_expiry();
      const SimTime t_next = std::min(t_arr, t_exp);
      if (t_next >= duration_) break;
      if (t_arr <= t_exp)
        process_arrival();
      else
        start_transmission(t_exp, {});
    }
    return std::move(trace_);
  }

private:
  struct ArrivalEvent {
    SimTime time;
    std::size_t station;
    std::size_t flow;
    bool operator>(const ArrivalEvent& o) const {
      if (time != o.time) return time > o.time;
      if (station != o.station) return station > o.station;
      return flow > o.flow;
    }
  };

  std::int64_t draw_backoff(StationRt& st) { return static_cast<std::int64_t>(st.rng.uniform_int(static_cast<std::uint64_t>(st.cw))); }

  SimTime next_expiry() const {
    SimTime best = kNever;
    for (const auto& st : stations_)
      if (st.backoff) best = std::min(best, countdown_start_ + *st.backoff * params_.slot);
    return best;
  }

  void schedule_next(FlowRt& fr, std::size_t si, std::size_t fi, SimTime now) {
    if (const auto* p = std::get_if<Periodic>(&fr.spec->source)) {
      fr.next_arrival = now + p->interval;
    } else if (const auto* b = std::get_if<Bursts>(&fr.spec->source)) {
      if (fr.burst_emitted < b->frames) {
        const SimTime start = static_cast<SimTime>(fr.burst_index) * b->period;
        fr.next_arrival = start + (b->frames > 1 ? b->on * fr.burst_emitted / b->frames : 0);
      } else {
        ++fr.burst_index;
        fr.burst_emitted = 0;
        fr.next_arrival = static_cast<SimTime>(fr.burst_index) * b->period;
      }
    }
    arrivals_.push({fr.next_arrival, si, fi});
  }

  void process_arrival() {
    const ArrivalEvent ev = arrivals_.top();
    arrivals_.pop();
    const SimTime t = ev.time;
    StationRt& st = stations_[ev.station];
    FlowRt& fr = st.flows[ev.flow];
    FlowStats& fs = stats_[fr.stats_index];

    int burst = -1;
    if (const auto* b = std::get_if<Bursts>(&fr.spec->source)) {
      if (fr.burst_index < 0) fr.burst_index = 0;
      if (fr.burst_emitted == 0) fr.open_bursts[fr.burst_index] = {t, b->frames};
      burst = fr.burst_index;
      ++fr.burst_emitted;
    }
    schedule_next(fr, ev.station, ev.flow, t);

    ++fs.offered;
    const std::size_t depth = st.depth();
    if (fr.spec->admit && !fr.spec->admit(depth)) {
      ++fs.gate_drops;
      abandon_burst_frame(fr, burst);
      return;
    }
    if (fr.queue.size() >= fr.spec->capacity) {
      ++fs.tail_drops;
      abandon_burst_frame(fr, burst);
      return;
    }
    const bool was_idle_station = !st.has_frame() && !st.backoff && !st.head_flow;
    fr.queue.push_back({t, burst});
    if (!was_idle_station) return;
    if (!busy_ && t >= countdown_start_) {
      start_transmission(t, {ev.station});
    } else {
      st.backoff = draw_backoff(st);
    }
  }

  void abandon_burst_frame(FlowRt& fr, int burst) {
    if (burst < 0) return;
    auto it = fr.open_bursts.find(burst);
    if (it != fr.open_bursts.end() && --it->second.second == 0) fr.open_bursts.erase(it);
  }

  std::size_t pick_flow(StationRt& st) {
    if (st.head_flow) return *st.head_flow;
    const std::size_t n = st.flows.size();
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t fi = (st.rr_next + k) % n;
      if (st.flows[fi].has_frame()) {
        st.rr_next = (fi + 1) % n;
        st.head_flow = fi;
        return fi;
      }
    }
    throw std::logic_error("station selected for transmission has no frame");
  }

  void start_transmission(SimTime ts, std::vector<std::size_t> txers) {
    const std::int64_t elapsed = ts > countdown_start_ ? (ts - countdown_start_) / params_.slot : 0;
    for (std::size_t si = 0; si < stations_.size(); ++si) {
      auto& st = stations_[si];
      if (!st.backoff) continue;
      if (countdown_start_ + *st.backoff * params_.slot == ts) {
        st.backoff.reset();
        if (st.has_frame() && std::find(txers.begin(), txers.end(), si) == txers.end()) txers.push_back(si);
      } else {
        *st.backoff -= elapsed;
      }
    }
    if (txers.empty()) return;  // post-backoff ended with nothing queued
    std::sort(txers.begin(), txers.end());

    const bool collision = txers.size() > 1;
    SimTime end = ts;
    bool any_unicast = false;
    in_flight_.clear();
    for (std::size_t si : txers) {
      auto& st = stations_[si];
      const std::size_t fi = pick_flow(st);
      const FlowSpec& f = *st.flows[fi].spec;
      const double payload_us = payload_airtime_us(f.size_bytes, f.rate_mbps);
      const SimTime payload = std::llround(payload_us * kNsPerUs);
      const SimTime busy = params_.phy_overhead + payload;
      end = std::max(end, ts + busy);
      const bool unicast = is_unicast(f.kind);
      any_unicast = any_unicast || unicast;
      in_flight_.push_back({si, fi, unicast});
      trace_.records.push_back(FrameRecord{Frame{st.spec->id, trace_.channel, f.size_bytes, f.rate_mbps, f.kind},
                                           static_cast<double>(ts) / kNsPerUs, payload_us,
                                           static_cast<double>(busy) / kNsPerUs,
                                           collision ? Outcome::collided : Outcome::delivered});
    }
    // Successful unicast: SIFS + ACK. Failed unicast: the sender waits out the
    // same span as its ACK timeout before contending again.
    if (any_unicast) end += params_.sifs + params_.ack_airtime;
    busy_ = true;
    busy_end_ = end;
    collision_ = collision;
  }

  void finish_transmission() {
    for (const auto& fl : in_flight_) {
      auto& st = stations_[fl.station];
      auto& fr = st.flows[fl.flow];
      auto& fs = stats_[fr.stats_index];
      bool done = true;
      if (!collision_) {
        ++fs.delivered;
        st.cw = params_.cw_min;
        st.retries = 0;
        complete_head(fr, busy_end_);
      } else if (!fl.unicast) {
        ++fs.lost;
        complete_head(fr, -1);
      } else if (++st.retries > params_.retry_limit) {
        ++fs.lost;
        st.cw = params_.cw_min;
        st.retries = 0;
        complete_head(fr, -1);
      } else {
        st.cw = std::min(2 * st.cw + 1, params_.cw_max);
        done = false;
      }
      if (done) st.head_flow.reset();
      st.backoff = draw_backoff(st);
    }
    in_flight_.clear();
    busy_ = false;
    countdown_start_ = busy_end_ + params_.difs;
  }

  void complete_head(FlowRt& fr, SimTime delivered_at) {
    if (fr.backlogged) return;
    const Pending p = fr.queue.front();
    fr.queue.pop_front();
    if (p.burst < 0) return;
    auto it = fr.open_bursts.find(p.burst);
    if (it == fr.open_bursts.end()) return;
    if (delivered_at < 0) {
      // A lost frame leaves the burst incomplete; stop tracking it.
      fr.open_bursts.erase(it);
      return;
    }
    if (--it->second.second == 0) {
      stats_[fr.stats_index].burst_completion_ms.push_back(static_cast<double>(delivered_at - it->second.first) /
                                                           kNsPerMs);
      fr.open_bursts.erase(it);
    }
  }

  MacParams params_;
  SimTime duration_;
  std::vector<FlowStats>& stats_;
  std::vector<StationRt> stations_;
  std::priority_queue<ArrivalEvent, std::vector<ArrivalEvent>, std::greater<>> arrivals_;
  ChannelTrace trace_;
  bool busy_ = false;
  bool collision_ = false;
  SimTime busy_end_ = 0;
  SimTime countdown_start_ = 0;
  std::vector<InFlight> in_flight_;
};

}  // namespace detail

inline void validate_stations(const std::vector<StationSpec>& stations) {
  std::set<std::pair<std::string, int>> seen;
  for (const auto& s : stations) {
    if (s.id.empty()) throw ConfigError("station id must not be empty");
    if (std::find(kChannels.begin(), kChannels.end(), s.channel) == kChannels.end())
      throw ConfigError("station '" + s.id + "' uses channel " + std::to_string(s.channel) + "; expected 1, 6 or 11");
    if (!seen.insert({s.id, s.channel}).second)
      throw ConfigError("station '" + s.id + "' appears twice on channel " + std::to_string(s.channel));
    for (const auto& f : s.flows) {
      try {
        Frame{s.id, s.channel, f.size_bytes, f.rate_mbps, f.kind}.validate();
      } catch (const DomainError& e) {
        throw ConfigError("station '" + s.id + "' flow '" + f.name + "': " + e.what());
      }
      if (f.capacity == 0) throw ConfigError("flow '" + f.name + "' needs a queue capacity >= 1");
      if (const auto* p = std::get_if<Periodic>(&f.source); p && p->interval <= 0)
        throw ConfigError("flow '" + f.name + "' needs a positive inter-arrival time");
      if (const auto* b = std::get_if<Bursts>(&f.source); b && (b->frames < 1 || b->period <= 0 || b->on < 0 || b->on > b->period))
        throw ConfigError("flow '" + f.name + "' has an invalid burst shape");
    }
  }
}

// Runs every channel that has at least one station. Channels share nothing,
// so each is simulated on its own with substreams keyed by station and channel.
inline MacRun run_mac(const std::vector<StationSpec>& stations, SimTime duration, const MacParams& params,
                      std::uint64_t seed) {
  if (duration <= 0) throw ConfigError("simulation duration must be positive");
  params.validate();
  validate_stations(stations);
  MacRun run;
  for (int ch : kChannels) {
    std::vector<const StationSpec*> on_channel;
    for (const auto& s : stations)
      if (s.channel == ch) on_channel.push_back(&s);
    if (on_channel.empty()) continue;
    detail::ChannelEngine engine(ch, std::move(on_channel), duration, params, seed, run.flows);
    run.traces.push_back(engine.run());
  }
  return run;
}

}  // namespace powifi::mac
