#include "powifi/fcc.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace powifi;
using namespace powifi::fcc;

TEST(Fcc, MaxConductedPower) {
  EXPECT_DOUBLE_EQ(max_conducted_power(GainDbi{6.0}).value, 30.0);
  EXPECT_DOUBLE_EQ(max_conducted_power(GainDbi{0.0}).value, 30.0);
  EXPECT_DOUBLE_EQ(max_conducted_power(GainDbi{9.0}).value, 27.0);
}

TEST(Fcc, ContinuousAtSixDbi) {
  const double eps = 1e-9;
  EXPECT_NEAR(max_conducted_power(GainDbi{6.0 - eps}).value, max_conducted_power(GainDbi{6.0 + eps}).value, 1e-8);
}

TEST(Fcc, DirectionalGain) {
  EXPECT_DOUBLE_EQ(directional_gain(GainDbi{6.0}, 1, true).value, 6.0);
  EXPECT_NEAR(directional_gain(GainDbi{6.0}, 3, true).value, 10.77, 0.005);
  EXPECT_DOUBLE_EQ(directional_gain(GainDbi{6.0}, 3, false).value, 6.0);
  EXPECT_THROW(directional_gain(GainDbi{6.0}, 0, true), DomainError);
}

TEST(Fcc, Compliance) {
  const auto corr = check_compliance({3, GainDbi{6.0}, Correlated{1.0}, PowerDbm{30.0}});
  EXPECT_NEAR(corr.allowed_total.value, 25.23, 0.005);
  EXPECT_FALSE(corr.compliant);
  EXPECT_NEAR(corr.margin_db.value, -4.77, 0.005);

  const auto unc = check_compliance({3, GainDbi{6.0}, Uncorrelated{}, PowerDbm{30.0}});
  EXPECT_DOUBLE_EQ(unc.allowed_total.value, 30.0);
  EXPECT_TRUE(unc.compliant);
  EXPECT_DOUBLE_EQ(unc.margin_db.value, 0.0);

  const auto asus = check_compliance({1, GainDbi{4.04}, Uncorrelated{}, PowerDbm{23.0}});
  EXPECT_TRUE(asus.compliant);
  EXPECT_NEAR(asus.margin_db.value, 7.0, 1e-12);
}

TEST(Fcc, PlanValidation) {
  EXPECT_THROW(check_compliance({0, GainDbi{6.0}, Uncorrelated{}, PowerDbm{30.0}}), DomainError);
  EXPECT_THROW(check_compliance({2, GainDbi{6.0}, Correlated{0.0}, PowerDbm{30.0}}), DomainError);
  EXPECT_THROW(check_compliance({2, GainDbi{6.0}, Correlated{1.5}, PowerDbm{30.0}}), DomainError);
}

TEST(Fcc, PerAntennaSumsLinearly) {
  const auto plan = TxPlan::from_per_antenna(2, GainDbi{6.0}, Uncorrelated{}, PowerDbm{27.0});
  EXPECT_NEAR(plan.total_conducted.value, 30.01, 0.005);
}

TEST(Fcc, DeliveredPower) {
  const auto f = Frequency::ghz(2.437);
  const auto d = Distance::meters(1.0);
  for (Correlation c : {Correlation{Uncorrelated{}}, Correlation{Correlated{1.0}}}) {
    const TxPlan plan{1, GainDbi{6.0}, c, PowerDbm{30.0}};
    EXPECT_NEAR(delivered_power_at_target(plan, GainDbi{2.0}, d, f).value, -2.18, 0.005);
  }
  const TxPlan unc{3, GainDbi{6.0}, Uncorrelated{}, PowerDbm{30.0}};
  const TxPlan bf{3, GainDbi{6.0}, Correlated{1.0}, PowerDbm{30.0}};
  const TxPlan bf_half{3, GainDbi{6.0}, Correlated{0.5}, PowerDbm{30.0}};
  const double p_unc = delivered_power_at_target(unc, GainDbi{2.0}, d, f).value;
  EXPECT_NEAR(delivered_power_at_target(bf, GainDbi{2.0}, d, f).value, p_unc, 1e-9);
  EXPECT_NEAR(p_unc - delivered_power_at_target(bf_half, GainDbi{2.0}, d, f).value, 3.0103, 1e-4);
}

TEST(Fcc, BeamformingNeverBeatsMultiplexing) {
  const auto f = Frequency::ghz(2.437);
  for (int n = 1; n <= 4; ++n) {
    const TxPlan unc{n, GainDbi{6.0}, Uncorrelated{}, PowerDbm{30.0}};
    const double p_unc = delivered_power_at_target(unc, GainDbi{2.0}, Distance::meters(3.0), f).value;
    const TxPlan bf{n, GainDbi{6.0}, Correlated{1.0}, PowerDbm{30.0}};
    EXPECT_NEAR(delivered_power_at_target(bf, GainDbi{2.0}, Distance::meters(3.0), f).value, p_unc, 1e-9);
    for (double eta : {0.9, 0.5}) {
      const TxPlan lossy{n, GainDbi{6.0}, Correlated{eta}, PowerDbm{30.0}};
      EXPECT_LT(delivered_power_at_target(lossy, GainDbi{2.0}, Distance::meters(3.0), f).value, p_unc);
    }
  }
}

TEST(Fcc, ReportPrintsKeyValues) {
  std::ostringstream os;
  os << check_compliance({1, GainDbi{4.04}, Uncorrelated{}, PowerDbm{23.0}});
  EXPECT_NE(os.str().find("compliant=true"), std::string::npos);
  EXPECT_NE(os.str().find("margin_db=7"), std::string::npos);
}
