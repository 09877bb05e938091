#pragma once

// 2.4 GHz ISM (2400-2483.5 MHz) conducted-power limits for single and
// multi-antenna transmitters, and the power such a transmitter can deliver to
// a point target once it is held to those limits.

#include "powifi/rf.hpp"
#include "powifi/units.hpp"

#include <cmath>
#include <ostream>
#include <variant>
#include <vector>

namespace powifi::fcc {

inline constexpr double kBaseLimitDbm = 30.0;
inline constexpr double kGainAllowanceDbi = 6.0;

struct Uncorrelated {};

// Beamforming. `efficiency` scales the coherent array gain at the focus.
struct Correlated {
  double efficiency = 1.0;
};

using Correlation = std::variant<Uncorrelated, Correlated>;

struct TxPlan {
  int n_ant = 1;
  GainDbi g_ant{0.0};
  Correlation correlation = Uncorrelated{};
  PowerDbm total_conducted{kBaseLimitDbm};

  bool correlated() const { return std::holds_alternative<Correlated>(correlation); }

  double beamforming_efficiency() const {
    if (auto* c = std::get_if<Correlated>(&correlation)) return c->efficiency;
    return 1.0;
  }

  void validate() const {
    if (n_ant < 1) throw DomainError("n_ant must be >= 1");
    if (correlated()) {
      const double eta = beamforming_efficiency();
      if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("beamforming efficiency must be in (0, 1]");
    }
  }

  // Total conducted power is the linear sum of what each antenna port carries.
  static TxPlan from_per_antenna(int n_ant, GainDbi g_ant, Correlation corr, PowerDbm per_antenna) {
    if (n_ant < 1) throw DomainError("n_ant must be >= 1");
    std::vector<PowerDbm> ports(static_cast<std::size_t>(n_ant), per_antenna);
    TxPlan plan{n_ant, g_ant, corr, sum_linear(ports)};
    plan.validate();
    return plan;
  }
};

struct ComplianceReport {
  GainDbi g_dir;
  PowerDbm allowed_total;
  PowerDbm actual_total;
  Decibels margin_db;
  bool compliant = false;
};

inline PowerDbm max_conducted_power(GainDbi g_dir) {
  if (g_dir.value <= kGainAllowanceDbi) return PowerDbm{kBaseLimitDbm};
  return PowerDbm{kBaseLimitDbm + kGainAllowanceDbi - g_dir.value};
}

inline GainDbi directional_gain(GainDbi g_ant, int n_ant, bool correlated) {
  if (n_ant < 1) throw DomainError("n_ant must be >= 1");
  if (!correlated) return g_ant;
  return g_ant + ratio_db(static_cast<double>(n_ant));
}

inline ComplianceReport check_compliance(const TxPlan& plan) {
  plan.validate();
  const GainDbi g_dir = directional_gain(plan.g_ant, plan.n_ant, plan.correlated());
  const PowerDbm allowed = max_conducted_power(g_dir);
  const Decibels margin = allowed - plan.total_conducted;
  return ComplianceReport{g_dir, allowed, plan.total_conducted, margin, margin.value >= 0.0};
}

// EIRP toward the focus after capping conducted power at the legal limit.
// Uncorrelated ports add power but no array gain; correlated ports add
// 10*log10(n * efficiency) at the focus.
inline PowerDbm effective_eirp(const TxPlan& plan) {
  const ComplianceReport report = check_compliance(plan);
  const PowerDbm capped = report.compliant ? plan.total_conducted : report.allowed_total;
  PowerDbm eirp = capped + plan.g_ant;
  if (plan.correlated())
    eirp = eirp + ratio_db(static_cast<double>(plan.n_ant) * plan.beamforming_efficiency());
  return eirp;
}

inline PowerDbm delivered_power_at_target(const TxPlan& plan, GainDbi g_rx, Distance d, Frequency f) {
  return effective_eirp(plan) - rf::fspl_db(d, f) + g_rx;
}

inline std::ostream& operator<<(std::ostream& os, const ComplianceReport& r) {
  os << "g_dir_dbi=" << r.g_dir.value << '\n'
     << "allowed_total_dbm=" << r.allowed_total.value << '\n'
     << "actual_total_dbm=" << r.actual_total.value << '\n'
     << "margin_db=" << r.margin_db.value << '\n'
     << "compliant=" << (r.compliant ? "true" : "false") << '\n';
  return os;
}

}  // namespace powifi::fcc
