#pragma once

// Line-oriented frame trace format, one record per line:
//
//   t_start_us,channel,station,kind,size_bytes,rate_mbps,outcome
//
// Lines starting with '#' are comments. A "# duration_us=<value>" comment
// records the capture length and becomes the default analysis window.

#include "powifi/mac.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace powifi::mac {

class TraceFormatError : public std::runtime_error {
public:
  TraceFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

inline std::string format_rate(double mbps) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%g", mbps);
  return buf;
}

inline void write_trace(std::ostream& os, const std::vector<ChannelTrace>& traces) {
  double duration = 0.0;
  for (const auto& t : traces) duration = std::max(duration, t.duration_us);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", duration);
  os << "# duration_us=" << buf << '\n';
  os << "# t_start_us,channel,station,kind,size_bytes,rate_mbps,outcome\n";
  for (const auto& t : traces) {
    for (const auto& r : t.records) {
      std::snprintf(buf, sizeof buf, "%.3f", r.t_start_us);
      os << buf << ',' << r.frame.channel << ',' << r.frame.station << ',' << to_string(r.frame.kind) << ','
         << r.frame.size_bytes << ',' << format_rate(r.frame.rate_mbps) << ',' << to_string(r.outcome) << '\n';
    }
  }
}

struct ImportedTrace {
  std::vector<ChannelTrace> traces;  // ascending channel order
  std::optional<double> declared_duration_us;
  double last_end_us = 0.0;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

inline double parse_double_field(std::string_view s, std::size_t line, const char* what) {
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size() || !std::isfinite(v))
    throw TraceFormatError(line, std::string("bad ") + what + " '" + tmp + "'");
  return v;
}

inline int parse_int_field(std::string_view s, std::size_t line, const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw TraceFormatError(line, std::string("bad ") + what + " '" + std::string(s) + "'");
  return v;
}

}  // namespace detail

inline ImportedTrace read_trace(std::istream& is) {
  ImportedTrace out;
  std::map<int, ChannelTrace> by_channel;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line(raw);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view key = "# duration_us=";
      if (line.substr(0, key.size()) == key)
        out.declared_duration_us = detail::parse_double_field(line.substr(key.size()), line_no, "duration");
      continue;
    }
    const auto f = detail::split_csv(line);
    if (f.size() != 7) throw TraceFormatError(line_no, "expected 7 fields, got " + std::to_string(f.size()));
    FrameRecord r;
    r.t_start_us = detail::parse_double_field(f[0], line_no, "t_start_us");
    r.frame.channel = detail::parse_int_field(f[1], line_no, "channel");
    r.frame.station = std::string(f[2]);
    const auto kind = parse_frame_kind(f[3]);
    if (!kind) throw TraceFormatError(line_no, "unknown frame kind '" + std::string(f[3]) + "'");
    r.frame.kind = *kind;
    r.frame.size_bytes = detail::parse_int_field(f[4], line_no, "size_bytes");
    r.frame.rate_mbps = detail::parse_double_field(f[5], line_no, "rate_mbps");
    if (!is_valid_rate(r.frame.rate_mbps)) throw TraceFormatError(line_no, "unknown rate '" + std::string(f[5]) + "'");
    if (r.frame.size_bytes < 1) throw TraceFormatError(line_no, "size_bytes must be >= 1");
    if (r.t_start_us < 0.0) throw TraceFormatError(line_no, "t_start_us must be >= 0");
    const auto outcome = parse_outcome(f[6]);
    if (!outcome) throw TraceFormatError(line_no, "unknown outcome '" + std::string(f[6]) + "'");
    r.outcome = *outcome;
    r.payload_airtime_us = payload_airtime_us(r.frame.size_bytes, r.frame.rate_mbps);
    r.busy_time_us = r.payload_airtime_us;
    out.last_end_us = std::max(out.last_end_us, r.t_start_us + r.payload_airtime_us);
    auto& tr = by_channel[r.frame.channel];
    tr.channel = r.frame.channel;
    tr.records.push_back(std::move(r));
  }
  const double duration = out.declared_duration_us.value_or(out.last_end_us);
  for (auto& [ch, tr] : by_channel) {
    std::stable_sort(tr.records.begin(), tr.records.end(),
                     [](const FrameRecord& a, const FrameRecord& b) { return a.t_start_us < b.t_start_us; });
    tr.duration_us = duration;
    out.traces.push_back(std::move(tr));
  }
  return out;
}

}  // namespace powifi::mac
