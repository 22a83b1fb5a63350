// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "parktax/breakeven.hpp"
#include "parktax/error.hpp"
#include "parktax/power_model.hpp"
#include "parktax/traffic.hpp"

namespace parktax {

struct AlwaysOn {};

struct FixedTTL {
  double ttl_s = 300;
};

// TTL equal to the breakeven time of the configured profile and loader.
struct BreakevenTTL {};

// Keeps an exponentially-decayed arrival-rate estimate with time constant
// window_s and evicts once it falls to the critical rate.
struct RateThreshold {
  double window_s = 3600;
};

// Two TTLs with a dead band: an idle gap no longer than ttl_low switches to
// the long TTL; only a gap longer than ttl_high switches back.
struct Hysteresis {
  double ttl_low_s = 300;
  double ttl_high_s = 900;
};

using Policy = std::variant<AlwaysOn, FixedTTL, BreakevenTTL, RateThreshold, Hysteresis>;

inline std::string policy_label(const Policy& p) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AlwaysOn>) return "always-on";
        if constexpr (std::is_same_v<T, FixedTTL>) return "ttl:" + detail::fmt_num(v.ttl_s);
        if constexpr (std::is_same_v<T, BreakevenTTL>) return "breakeven";
        if constexpr (std::is_same_v<T, RateThreshold>)
          return "rate:" + detail::fmt_num(v.window_s);
        if constexpr (std::is_same_v<T, Hysteresis>)
          return "hysteresis:" + detail::fmt_num(v.ttl_low_s) + "," + detail::fmt_num(v.ttl_high_s);
      },
      p);
}

/// Parses always-on | ttl:<s> | breakeven | rate:<window_s> | hysteresis:<lo>,<hi>.
inline Policy parse_policy(const std::string& text) {
  auto num = [&](const std::string& s) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    detail::require(pos == s.size() && pos > 0, "bad number in policy '" + text + "'");
    detail::require(v > 0, "policy timeouts must be > 0 in '" + text + "'");
    return v;
  };
  const auto colon = text.find(':');
  const auto kind = detail::lower(text.substr(0, colon));
  const auto arg = colon == std::string::npos ? std::string{} : text.substr(colon + 1);
  if (kind == "always-on" || kind == "alwayson") return AlwaysOn{};
  if (kind == "breakeven") return BreakevenTTL{};
  if (kind == "ttl") return FixedTTL{num(arg)};
  if (kind == "rate") return RateThreshold{num(arg)};
  if (kind == "hysteresis") {
    const auto comma = arg.find(',');
    detail::require(comma != std::string::npos, "hysteresis policy needs <lo>,<hi>");
    Hysteresis h{num(arg.substr(0, comma)), num(arg.substr(comma + 1))};
    detail::require(h.ttl_low_s <= h.ttl_high_s, "hysteresis needs lo <= hi");
    return h;
  }
  throw DomainError("unknown policy '" + text + "'");
}

struct SimConfig {
  GpuProfile profile;
  LoadProfile load;
  Policy policy = AlwaysOn{};
  ArrivalTrace trace;
  double duration_s = 86400;
  // Count the load that made the model warm before t=0 as a cold start.
  bool count_initial_load = true;
};

struct SimResult {
  double energy_wh = 0;
  std::size_t cold_starts = 0;
  std::size_t total_requests = 0;
  double avg_added_latency_s = 0;
  double time_warm_s = 0;
  double time_evicted_s = 0;
  double time_loading_s = 0;
  std::optional<double> savings_vs_always_on_pct;

  friend bool operator==(const SimResult&, const SimResult&) = default;
};

inline void to_json(nlohmann::json& j, const SimResult& r) {
  j = nlohmann::json{{"energy_wh", r.energy_wh},
                     {"cold_starts", r.cold_starts},
                     {"total_requests", r.total_requests},
                     {"avg_added_latency_s", r.avg_added_latency_s},
                     {"time_warm_s", r.time_warm_s},
                     {"time_evicted_s", r.time_evicted_s},
                     {"time_loading_s", r.time_loading_s},
                     {"savings_vs_always_on_pct", nullptr}};
  if (r.savings_vs_always_on_pct) j["savings_vs_always_on_pct"] = *r.savings_vs_always_on_pct;
}

enum class GpuState { Warm, Evicted, Loading };

inline const char* to_string(GpuState s) {
  switch (s) {
    case GpuState::Warm: return "warm";
    case GpuState::Evicted: return "evicted";
    case GpuState::Loading: return "loading";
  }
  return "?";
}

struct Segment {
  double t_start = 0;
  double t_end = 0;
  GpuState state = GpuState::Warm;
  double power_w = 0;
};

struct SimRun {
  SimResult result;
  std::vector<Segment> timeline;
};

namespace detail {

// Decides how long the model may stay idle once its last service completes.
class IdleController {
 public:
  IdleController(const Policy& policy, const GpuProfile& profile, const LoadProfile& load)
      : policy_(policy) {
    if (std::holds_alternative<BreakevenTTL>(policy_))
      policy_ = FixedTTL{breakeven_time(parking_tax(profile), load)};
    if (std::holds_alternative<RateThreshold>(policy_))
      lambda_star_ = critical_rate(parking_tax(profile), load);
    validate();
  }

  // gap: idle time between the previous service completion and this arrival,
  // or nullopt if the arrival queued behind an in-flight load.
  void on_arrival(double t, std::optional<double> gap) {
    if (auto* r = std::get_if<RateThreshold>(&policy_)) {
      rate_ = decayed_rate(t, r->window_s) + 1.0 / r->window_s;
      rate_at_ = t;
    } else if (auto* h = std::get_if<Hysteresis>(&policy_); h && gap) {
      if (*gap <= h->ttl_low_s) long_mode_ = true;
      else if (*gap > h->ttl_high_s) long_mode_ = false;
    }
  }

  double timeout_from(double idle_start) const {
    return std::visit(
        [&](const auto& v) -> double {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, AlwaysOn>) {
            return std::numeric_limits<double>::infinity();
          } else if constexpr (std::is_same_v<T, FixedTTL>) {
            return v.ttl_s;
          } else if constexpr (std::is_same_v<T, RateThreshold>) {
            const double r = decayed_rate(idle_start, v.window_s);
            return r > lambda_star_ ? v.window_s * std::log(r / lambda_star_) : 0.0;
          } else if constexpr (std::is_same_v<T, Hysteresis>) {
            return long_mode_ ? v.ttl_high_s : v.ttl_low_s;
          } else {
            return 0.0;  // BreakevenTTL is rewritten to FixedTTL in the constructor
          }
        },
        policy_);
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, FixedTTL>) {
            require(v.ttl_s > 0, "TTL must be > 0");
          } else if constexpr (std::is_same_v<T, RateThreshold>) {
            require(v.window_s > 0, "rate window must be > 0");
          } else if constexpr (std::is_same_v<T, Hysteresis>) {
            require(v.ttl_low_s > 0 && v.ttl_high_s >= v.ttl_low_s,
                    "hysteresis needs 0 < ttl_low <= ttl_high");
          }
        },
        policy_);
  }

  double decayed_rate(double t, double window_s) const {
    return rate_ * std::exp(-(t - rate_at_) / window_s);
  }

  Policy policy_;
  double lambda_star_ = 0;
  double rate_ = 0;
  double rate_at_ = 0;
  bool long_mode_ = false;
};

class Timeline {
 public:
  Timeline(const GpuProfile& profile, double duration_s)
      : profile_(profile), duration_s_(duration_s) {}

  void warm_until(double t) { emit(t, GpuState::Warm, profile_.p_ctx_w); }
  void evicted_until(double t) { emit(t, GpuState::Evicted, profile_.p_base_w); }

  // Appends the load stages starting at the current cursor, clipped to the window.
  void load(const LoadProfile& load) {
    for (const auto& stage : load.stages) {
      const double start = cursor_;
      emit(cursor_ + stage.duration_s, GpuState::Loading, stage.power_w);
      load_energy_j_ += stage.power_w * (cursor_ - start);
    }
  }

  double cursor() const { return cursor_; }
  double load_energy_j() const { return load_energy_j_; }
  std::vector<Segment>& segments() { return segments_; }

 private:
  void emit(double t_end, GpuState state, double power_w) {
    t_end = std::min(t_end, duration_s_);
    if (t_end <= cursor_) return;
    segments_.push_back({cursor_, t_end, state, power_w});
    cursor_ = t_end;
  }

  const GpuProfile& profile_;
  double duration_s_;
  double cursor_ = 0;
  double load_energy_j_ = 0;
  std::vector<Segment> segments_;
};

inline void validate(const SimConfig& c) {
  validate(c.profile);
  validate(c.load);
  require(c.duration_s > 0 && std::isfinite(c.duration_s), "duration must be > 0");
  require(c.trace.duration_s <= c.duration_s, "trace extends past the simulation duration");
  double prev = 0;
  for (double t : c.trace.arrival_times_s) {
    require(t >= 0 && t < c.duration_s, "arrival outside [0, duration)");
    require(t >= prev, "arrival times must be sorted");
    prev = t;
  }
}

}  // namespace detail

/// Replays a trace against one warm-at-start model instance. Service is
/// instantaneous; a request that finds the model evicted triggers a load,
/// and requests arriving during a load wait for it.
inline SimRun simulate_timeline(const SimConfig& config) {
  detail::validate(config);
  const double t_load = config.load.total_duration();
  detail::IdleController controller(config.policy, config.profile, config.load);
  detail::Timeline timeline(config.profile, config.duration_s);

  bool warm = true;
  double busy_until = 0;  // completion time of the most recent service
  double total_wait_s = 0;
  std::size_t loads = 0;

  for (double a : config.trace.arrival_times_s) {
    if (warm) {
      const double deadline = busy_until + controller.timeout_from(busy_until);
      if (a > deadline) {
        timeline.warm_until(deadline);
        warm = false;
      }
    }
    if (warm) {
      if (a < busy_until) {
        total_wait_s += busy_until - a;
        controller.on_arrival(a, std::nullopt);
      } else {
        controller.on_arrival(a, a - busy_until);
        busy_until = a;
      }
      continue;
    }
    controller.on_arrival(a, a - busy_until);
    timeline.evicted_until(a);
    timeline.load(config.load);
    ++loads;
    total_wait_s += t_load;
    busy_until = a + t_load;
    warm = true;
  }

  if (warm) {
    const double deadline = busy_until + controller.timeout_from(busy_until);
    timeline.warm_until(deadline);
  }
  timeline.evicted_until(config.duration_s);

  SimRun run;
  run.timeline = std::move(timeline.segments());
  SimResult& r = run.result;
  for (const auto& s : run.timeline) {
    const double dt = s.t_end - s.t_start;
    switch (s.state) {
      case GpuState::Warm: r.time_warm_s += dt; break;
      case GpuState::Evicted: r.time_evicted_s += dt; break;
      case GpuState::Loading: r.time_loading_s += dt; break;
    }
  }
  r.energy_wh = (config.profile.p_ctx_w * r.time_warm_s +
                 config.profile.p_base_w * r.time_evicted_s + timeline.load_energy_j()) /
                kSecondsPerHour;
  r.cold_starts = loads + (config.count_initial_load ? 1 : 0);
  r.total_requests = config.trace.size();
  r.avg_added_latency_s = r.total_requests ? total_wait_s / static_cast<double>(r.total_requests) : 0;
  return run;
}

inline SimResult simulate(const SimConfig& config) { return simulate_timeline(config).result; }

/// Runs every policy on the same trace and fills savings against AlwaysOn.
inline std::vector<SimResult> compare_policies(const GpuProfile& profile, const LoadProfile& load,
                                               const ArrivalTrace& trace,
                                               const std::vector<Policy>& policies,
                                               double duration_s = 86400,
                                               bool count_initial_load = true) {
  detail::require(!policies.empty(), "policy list is empty");
  const auto baseline = std::find_if(policies.begin(), policies.end(), [](const Policy& p) {
    return std::holds_alternative<AlwaysOn>(p);
  });
  detail::require(baseline != policies.end(), "policy list must include always-on");

  std::vector<SimResult> out;
  out.reserve(policies.size());
  for (const auto& p : policies)
    out.push_back(simulate({profile, load, p, trace, duration_s, count_initial_load}));
  const double e_on = out[static_cast<std::size_t>(baseline - policies.begin())].energy_wh;
  for (auto& r : out) r.savings_vs_always_on_pct = 100.0 * (e_on - r.energy_wh) / e_on;
  return out;
}

struct SweepRow {
  std::string profile;
  std::string load;
  double park_w = 0;
  double t_star_s = 0;
  double lambda_star_per_hr = 0;
};

inline std::vector<SweepRow> sweep_breakeven(const std::vector<GpuProfile>& profiles,
                                             const std::vector<LoadProfile>& loads) {
  detail::require(!profiles.empty() && !loads.empty(), "sweep needs profiles and loads");
  std::vector<SweepRow> rows;
  for (const auto& p : profiles)
    for (const auto& l : loads) {
      const auto be = breakeven(p, l);
      rows.push_back({p.name, l.label, be.park_w, be.t_star_s, be.lambda_star_per_hr()});
    }
  return rows;
}

}  // namespace parktax
