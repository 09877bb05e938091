#pragma once

// Free-space link budget between the router and a harvester.

#include "powifi/units.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace powifi::rf {

inline constexpr double kSpeedOfLight = 299'792'458.0;

class NoSolutionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Calibrated attenuations. Only the ordering is grounded in measurement; the
// magnitudes are fit so that through-wall inter-event times keep that order.
enum class WallMaterial { none, double_pane_glass, wooden_door, hollow_wall, double_sheetrock };

inline constexpr std::array<WallMaterial, 5> kAllWalls = {
    WallMaterial::none, WallMaterial::double_pane_glass, WallMaterial::wooden_door,
    WallMaterial::hollow_wall, WallMaterial::double_sheetrock};

inline Decibels attenuation(WallMaterial w) {
  switch (w) {
    case WallMaterial::none: return Decibels{0.0};
    case WallMaterial::double_pane_glass: return Decibels{3.0};
    case WallMaterial::wooden_door: return Decibels{5.0};
    case WallMaterial::hollow_wall: return Decibels{8.0};
    case WallMaterial::double_sheetrock: return Decibels{11.0};
  }
  return Decibels{0.0};
}

inline std::string_view to_string(WallMaterial w) {
  switch (w) {
    case WallMaterial::none: return "none";
    case WallMaterial::double_pane_glass: return "double_pane_glass";
    case WallMaterial::wooden_door: return "wooden_door";
    case WallMaterial::hollow_wall: return "hollow_wall";
    case WallMaterial::double_sheetrock: return "double_sheetrock";
  }
  return "none";
}

inline std::optional<WallMaterial> parse_wall(std::string_view s) {
  for (auto w : kAllWalls)
    if (to_string(w) == s) return w;
  return std::nullopt;
}

// 2.4 GHz channel centers used by the router (1, 6, 11).
inline Frequency channel_center(int channel) {
  if (channel < 1 || channel > 13) throw DomainError("2.4 GHz channel must be in 1..13");
  return Frequency::mhz(2407.0 + 5.0 * channel);
}

struct LinkGeometry {
  Distance distance;
  Frequency freq;
  WallMaterial wall = WallMaterial::none;
};

inline Decibels fspl_db(Distance d, Frequency f) {
  return Decibels{20.0 * std::log10(4.0 * std::numbers::pi * d.meters() * f.hz() / kSpeedOfLight)};
}

inline PowerDbm received_power(PowerDbm eirp, GainDbi g_rx, const LinkGeometry& link) {
  return eirp - fspl_db(link.distance, link.freq) - attenuation(link.wall) + g_rx;
}

// Closed-form Friis inversion: the distance at which received power equals
// `threshold`. Solutions closer than 1 cm are treated as unreachable.
inline Distance range_for_threshold(PowerDbm eirp, GainDbi g_rx, Frequency f, PowerDbm threshold,
                                    WallMaterial wall = WallMaterial::none) {
  const double budget_db = (eirp + g_rx - attenuation(wall) - threshold).value;
  const double meters =
      std::pow(10.0, budget_db / 20.0) * kSpeedOfLight / (4.0 * std::numbers::pi * f.hz());
  if (!std::isfinite(meters) || meters < 0.01)
    throw NoSolutionError("threshold " + std::to_string(threshold.value) +
                          " dBm is not reachable at any distance >= 1 cm");
  return Distance{meters};
}

}  // namespace powifi::rf
