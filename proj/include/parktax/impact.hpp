// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <string>

#include <json.hpp>

#include "parktax/error.hpp"

namespace parktax {

// kg CO2 per kWh; back-derived from 180 kT at 462 GWh (US grid average).
inline constexpr double kDefaultGridIntensityKgPerKwh = 0.39;
inline constexpr double kHoursPerYear = 8760;

struct FleetScenario {
  double n_gpus = 0;
  double utilization = 0;  // fraction of time busy
  double park_w = 0;       // fleet-average parking tax
  double hours_per_year = kHoursPerYear;
  double grid_intensity_kg_per_kwh = kDefaultGridIntensityKgPerKwh;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FleetScenario, n_gpus, utilization, park_w,
                                                hours_per_year, grid_intensity_kg_per_kwh)

inline void validate(const FleetScenario& s) {
  detail::require(s.n_gpus >= 0, "n_gpus must be >= 0");
  detail::require(s.utilization >= 0 && s.utilization <= 1, "utilization must be in [0, 1]");
  detail::require(s.park_w > 0, "park power must be > 0");
  detail::require(s.hours_per_year > 0, "hours_per_year must be > 0");
  detail::require(s.grid_intensity_kg_per_kwh >= 0, "grid intensity must be >= 0");
}

/// Energy spent parked across the fleet in one year, GWh.
inline double annual_parking_energy(const FleetScenario& s) {
  validate(s);
  return s.n_gpus * (1 - s.utilization) * s.park_w * s.hours_per_year / 1e9;
}

/// Kilotonnes CO2 for an energy in GWh.
inline double co2(double energy_gwh, double intensity_kg_per_kwh) {
  detail::require(energy_gwh >= 0 && intensity_kg_per_kwh >= 0,
                  "energy and intensity must be >= 0");
  return energy_gwh * 1e6 * intensity_kg_per_kwh / 1e6;
}

struct SensitivityGrid {
  std::array<FleetScenario, 3> scenarios;  // low, base, high
  std::array<double, 3> energy_gwh{};
  std::array<double, 3> co2_kt{};
};

/// Low/base/high table. Corners must be ordered in the energy-increasing
/// direction: more GPUs, lower utilization, higher parking tax.
inline SensitivityGrid sensitivity_grid(const FleetScenario& low, const FleetScenario& base,
                                        const FleetScenario& high) {
  auto ordered = [](double a, double b, double c) { return a <= b && b <= c; };
  if (!ordered(low.n_gpus, base.n_gpus, high.n_gpus))
    throw DomainError("sensitivity grid: n_gpus must satisfy low <= base <= high");
  if (!ordered(high.utilization, base.utilization, low.utilization))
    throw DomainError("sensitivity grid: utilization must satisfy low >= base >= high");
  if (!ordered(low.park_w, base.park_w, high.park_w))
    throw DomainError("sensitivity grid: park_w must satisfy low <= base <= high");
  if (!ordered(low.hours_per_year, base.hours_per_year, high.hours_per_year))
    throw DomainError("sensitivity grid: hours_per_year must satisfy low <= base <= high");

  SensitivityGrid g{{low, base, high}, {}, {}};
  for (std::size_t i = 0; i < 3; ++i) {
    g.energy_gwh[i] = annual_parking_energy(g.scenarios[i]);
    g.co2_kt[i] = co2(g.energy_gwh[i], g.scenarios[i].grid_intensity_kg_per_kwh);
  }
  return g;
}

/// Published corners of the fleet sensitivity table.
inline SensitivityGrid default_sensitivity_grid() {
  return sensitivity_grid({2.0e6, 0.80, 26.3}, {3.76e6, 0.65, 40}, {6.0e6, 0.50, 66.4});
}

}  // namespace parktax
