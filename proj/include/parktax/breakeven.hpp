// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parktax/error.hpp"
#include "parktax/power_model.hpp"

namespace parktax {

inline constexpr double kSecondsPerHour = 3600.0;

struct BreakevenResult {
  double t_star_s = 0;
  double lambda_star_per_s = 0;
  double park_w = 0;
  double load_energy_j = 0;

  double t_star_min() const { return t_star_s / 60.0; }
  double lambda_star_per_hr() const { return lambda_star_per_s * kSecondsPerHour; }
};

// Idle time after which evicting and reloading costs less energy than staying
// warm. Staged profiles reduce to their total energy.
inline double breakeven_time(double park_w, const LoadProfile& load) {
  detail::require(park_w > 0, "park_w must be > 0");
  return load_energy(load) / park_w;
}

inline double critical_rate(double park_w, const LoadProfile& load) {
  detail::require(park_w > 0, "park_w must be > 0");
  return park_w / load_energy(load);
}

inline BreakevenResult breakeven(double park_w, const LoadProfile& load) {
  return {breakeven_time(park_w, load), critical_rate(park_w, load), park_w, load_energy(load)};
}

inline BreakevenResult breakeven(const GpuProfile& profile, const LoadProfile& load) {
  return breakeven(parking_tax(profile), load);
}

// Memoryless arrivals: keep warm iff the arrival rate exceeds the critical rate.
inline bool keep_warm_decision(double arrival_rate_per_s, double park_w, const LoadProfile& load) {
  detail::require(arrival_rate_per_s >= 0, "arrival rate must be >= 0");
  return arrival_rate_per_s > critical_rate(park_w, load);
}

}  // namespace parktax
