// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "parktax/impact.hpp"

namespace parktax {
namespace {

TEST(AnnualParkingEnergy, PublishedCorners) {
  EXPECT_NEAR(annual_parking_energy({3.76e6, 0.65, 40}), 461.1264, 1e-9);
  EXPECT_NEAR(annual_parking_energy({2.0e6, 0.80, 26.3}), 92.1552, 1e-9);
  EXPECT_NEAR(annual_parking_energy({6.0e6, 0.50, 66.4}), 1744.992, 1e-9);
}

TEST(AnnualParkingEnergy, UtilizationLimits) {
  EXPECT_EQ(annual_parking_energy({1e6, 1.0, 40}), 0);
  EXPECT_NEAR(annual_parking_energy({1e6, 0.0, 40}), 1e6 * 40 * 8760 / 1e9, 1e-12);
}

TEST(AnnualParkingEnergy, LinearInEachFactor) {
  const FleetScenario s{3.76e6, 0.65, 40};
  const double e = annual_parking_energy(s);
  for (double k : {0.5, 2.0, 3.0}) {
    auto a = s;
    a.n_gpus *= k;
    EXPECT_NEAR(annual_parking_energy(a), k * e, 1e-9 * k * e);
    auto b = s;
    b.park_w *= k;
    EXPECT_NEAR(annual_parking_energy(b), k * e, 1e-9 * k * e);
    auto c = s;
    c.utilization = 1 - (1 - s.utilization) * k / 3;
    EXPECT_NEAR(annual_parking_energy(c), k / 3 * e, 1e-9 * e);
  }
}

TEST(AnnualParkingEnergy, RejectsInvalidScenario) {
  EXPECT_THROW(annual_parking_energy({-1, 0.5, 40}), DomainError);
  EXPECT_THROW(annual_parking_energy({1e6, 1.5, 40}), DomainError);
  EXPECT_THROW(annual_parking_energy({1e6, 0.5, 0}), DomainError);
}

TEST(Co2, Examples) {
  EXPECT_NEAR(co2(462, 0.39), 180.18, 1e-9);
  EXPECT_EQ(std::lround(co2(462, kDefaultGridIntensityKgPerKwh)), 180);
  EXPECT_EQ(co2(0, 0.7), 0);
  EXPECT_NEAR(co2(100, 0.39), 39, 1e-12);
  EXPECT_THROW(co2(-1, 0.39), DomainError);
}

TEST(SensitivityGrid, PublishedTable) {
  const auto g = default_sensitivity_grid();
  EXPECT_NEAR(g.energy_gwh[0], 92, 1);
  EXPECT_NEAR(g.energy_gwh[1], 462, 1);
  EXPECT_NEAR(g.energy_gwh[2], 1745, 1);
  EXPECT_NEAR(g.co2_kt[1], 180, 1);
}

TEST(SensitivityGrid, EqualCornersGiveEqualOutputs) {
  const FleetScenario s{1e6, 0.7, 30};
  const auto g = sensitivity_grid(s, s, s);
  EXPECT_EQ(g.energy_gwh[0], g.energy_gwh[1]);
  EXPECT_EQ(g.energy_gwh[1], g.energy_gwh[2]);
}

TEST(SensitivityGrid, OrderingViolationNamesParameter) {
  try {
    sensitivity_grid({2e6, 0.5, 26.3}, {3.76e6, 0.65, 40}, {6e6, 0.8, 66.4});
    FAIL() << "expected an ordering error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("utilization"), std::string::npos);
  }
  EXPECT_THROW(sensitivity_grid({7e6, 0.8, 26.3}, {3.76e6, 0.65, 40}, {6e6, 0.5, 66.4}),
               DomainError);
  EXPECT_THROW(sensitivity_grid({2e6, 0.8, 50}, {3.76e6, 0.65, 40}, {6e6, 0.5, 66.4}),
               DomainError);
}

TEST(FleetScenario, JsonDefaults) {
  const auto s = nlohmann::json::parse(R"({"n_gpus": 1e6, "utilization": 0.5, "park_w": 40})")
                     .get<FleetScenario>();
  EXPECT_EQ(s.hours_per_year, 8760);
  EXPECT_EQ(s.grid_intensity_kg_per_kwh, 0.39);
}

}  // namespace
}  // namespace parktax
