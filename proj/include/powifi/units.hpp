#pragma once

// Unit-tagged scalars for RF power bookkeeping. Powers live in dBm and only
// become linear at summation points; adding two dBm values is a compile error.

#include <cmath>
#include <compare>
#include <span>
#include <stdexcept>
#include <string>

namespace powifi {

class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Dimensionless ratio in dB (gains, losses, margins).
struct Decibels {
  double value = 0.0;

  constexpr Decibels() = default;
  constexpr explicit Decibels(double v) : value(v) {}

  constexpr Decibels operator-() const { return Decibels{-value}; }
  constexpr Decibels operator+(Decibels o) const { return Decibels{value + o.value}; }
  constexpr Decibels operator-(Decibels o) const { return Decibels{value - o.value}; }
  constexpr auto operator<=>(const Decibels&) const = default;
};

struct GainDbi {
  double value = 0.0;

  constexpr GainDbi() = default;
  constexpr explicit GainDbi(double v) : value(v) {}

  constexpr GainDbi operator+(Decibels d) const { return GainDbi{value + d.value}; }
  constexpr Decibels operator-(GainDbi o) const { return Decibels{value - o.value}; }
  constexpr auto operator<=>(const GainDbi&) const = default;
};

struct PowerMw {
  double value = 0.0;

  constexpr PowerMw() = default;
  explicit PowerMw(double v) : value(v) {
    if (!(v >= 0.0)) throw DomainError("linear power must be non-negative");
  }

  PowerMw operator+(PowerMw o) const { return PowerMw{value + o.value}; }
  PowerMw operator*(double k) const { return PowerMw{value * k}; }
  constexpr double watts() const { return value * 1e-3; }
  static PowerMw from_watts(double w) { return PowerMw{w * 1e3}; }
  constexpr auto operator<=>(const PowerMw&) const = default;
};

struct PowerDbm {
  double value = 0.0;

  constexpr PowerDbm() = default;
  constexpr explicit PowerDbm(double v) : value(v) {}

  constexpr PowerDbm operator+(GainDbi g) const { return PowerDbm{value + g.value}; }
  constexpr PowerDbm operator-(GainDbi g) const { return PowerDbm{value - g.value}; }
  constexpr PowerDbm operator+(Decibels d) const { return PowerDbm{value + d.value}; }
  constexpr PowerDbm operator-(Decibels d) const { return PowerDbm{value - d.value}; }
  // Ratio of two absolute powers.
  constexpr Decibels operator-(PowerDbm o) const { return Decibels{value - o.value}; }
  PowerDbm operator+(PowerDbm) const = delete;

  constexpr bool is_silent() const { return std::isinf(value) && value < 0; }
  static constexpr PowerDbm silence() { return PowerDbm{-HUGE_VAL}; }
  constexpr auto operator<=>(const PowerDbm&) const = default;
};

class Frequency {
public:
  explicit Frequency(double hz) : hz_(hz) {
    if (!(hz > 0.0) || !std::isfinite(hz)) throw DomainError("frequency must be positive");
  }
  static Frequency ghz(double g) { return Frequency{g * 1e9}; }
  static Frequency mhz(double m) { return Frequency{m * 1e6}; }

  double hz() const { return hz_; }
  auto operator<=>(const Frequency&) const = default;

private:
  double hz_;
};

class Distance {
public:
  static constexpr double kMetersPerFoot = 0.3048;

  explicit Distance(double meters) : m_(meters) {
    if (!(meters > 0.0) || !std::isfinite(meters)) throw DomainError("distance must be positive");
  }
  static Distance meters(double m) { return Distance{m}; }
  static Distance feet(double ft) { return Distance{ft * kMetersPerFoot}; }

  double meters() const { return m_; }
  double feet() const { return m_ / kMetersPerFoot; }
  auto operator<=>(const Distance&) const = default;

private:
  double m_;
};

inline PowerMw dbm_to_mw(PowerDbm p) {
  if (p.is_silent()) return PowerMw{0.0};
  if (!std::isfinite(p.value)) throw DomainError("dBm value must be finite");
  return PowerMw{std::pow(10.0, p.value / 10.0)};
}

inline PowerDbm mw_to_dbm(PowerMw p) {
  if (!(p.value > 0.0)) throw DomainError("cannot express non-positive power in dBm");
  return PowerDbm{10.0 * std::log10(p.value)};
}

// Same as mw_to_dbm but maps zero power to silence instead of throwing.
inline PowerDbm mw_to_dbm_or_silence(PowerMw p) {
  return p.value > 0.0 ? mw_to_dbm(p) : PowerDbm::silence();
}

inline Decibels ratio_db(double linear) {
  if (!(linear > 0.0)) throw DomainError("cannot express non-positive ratio in dB");
  return Decibels{10.0 * std::log10(linear)};
}

inline PowerDbm sum_linear(std::span<const PowerDbm> ps) {
  if (ps.empty()) throw DomainError("sum_linear needs at least one power");
  double mw = 0.0;
  for (const auto& p : ps) mw += dbm_to_mw(p).value;
  return mw_to_dbm_or_silence(PowerMw{mw});
}

inline PowerDbm sum_linear(std::initializer_list<PowerDbm> ps) {
  return sum_linear(std::span<const PowerDbm>(ps.begin(), ps.size()));
}

}  // namespace powifi
