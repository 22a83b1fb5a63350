// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "parktax/error.hpp"
#include "parktax/power_model.hpp"
#include "parktax/stats.hpp"

namespace parktax {

inline constexpr const char* kTelemetryHeader =
    "timestamp_s,gpu_id,power_w,sm_clock_mhz,vram_used_gb,util_pct";
inline constexpr double kDefaultClockThresholdMhz = 700;
inline constexpr double kTelemetryCadenceS = 30;

struct TelemetrySample {
  double timestamp_s = 0;
  std::string gpu_id;
  double power_w = 0;
  double sm_clock_mhz = 0;
  double vram_used_gb = 0;
  double util_pct = 0;

  friend bool operator==(const TelemetrySample&, const TelemetrySample&) = default;
};

struct IngestResult {
  std::vector<TelemetrySample> samples;
  std::size_t total_rows = 0;
  std::size_t retained = 0;
  double retention_fraction = 0;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// CSV I/O

inline void write_telemetry_csv(const std::vector<TelemetrySample>& samples, std::ostream& out) {
  out << kTelemetryHeader << "\n";
  out << std::fixed;
  for (const auto& s : samples) {
    out << std::setprecision(3) << s.timestamp_s << ',' << s.gpu_id << ',' << std::setprecision(6)
        << s.power_w << ',' << std::setprecision(1) << s.sm_clock_mhz << ',' << std::setprecision(6)
        << s.vram_used_gb << ',' << std::setprecision(2) << s.util_pct << "\n";
  }
}

inline void write_telemetry_csv(const std::vector<TelemetrySample>& samples,
                                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path.string());
  write_telemetry_csv(samples, out);
}

/// Reads DCGM-style telemetry and keeps rows with util_pct <= util_filter_pct.
/// All malformed rows are collected and reported together.
inline IngestResult ingest(std::istream& in, double util_filter_pct,
                           const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file, missing header", {1});
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTelemetryHeader)
    throw ParseError(source + ":1: header must be '" + std::string(kTelemetryHeader) + "'", {1});

  IngestResult res;
  std::vector<std::size_t> bad;
  std::string bad_detail;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++res.total_rows;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();

    auto num = [](const std::string& f, double& out) {
      std::size_t pos = 0;
      try {
        out = std::stod(f, &pos);
      } catch (const std::exception&) {
        return false;
      }
      return pos == f.size() && std::isfinite(out);
    };
    TelemetrySample s;
    const bool ok = fields.size() == 6 && num(fields[0], s.timestamp_s) && !fields[1].empty() &&
                    num(fields[2], s.power_w) && num(fields[3], s.sm_clock_mhz) &&
                    num(fields[4], s.vram_used_gb) && num(fields[5], s.util_pct) &&
                    s.power_w > 0 && s.util_pct >= 0 && s.util_pct <= 100 && s.vram_used_gb >= 0;
    if (!ok) {
      if (bad.size() < 5) bad_detail += "\n  row " + std::to_string(lineno) + ": " + line;
      bad.push_back(lineno);
      continue;
    }
    s.gpu_id = fields[1];
    if (s.util_pct <= util_filter_pct) res.samples.push_back(std::move(s));
  }
  if (!bad.empty()) {
    std::string rows;
    for (std::size_t i = 0; i < bad.size(); ++i) rows += (i ? "," : "") + std::to_string(bad[i]);
    throw ParseError(source + ": malformed rows " + rows + bad_detail, std::move(bad));
  }
  res.retained = res.samples.size();
  res.retention_fraction =
      res.total_rows ? static_cast<double>(res.retained) / static_cast<double>(res.total_rows) : 0;
  if (res.samples.empty()) res.warnings.push_back("no samples left after utilization filter");
  return res;
}

inline IngestResult ingest(const std::filesystem::path& path, double util_filter_pct) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path.string());
  return ingest(in, util_filter_pct, path.string());
}

// ---------------------------------------------------------------------------
// State classification and two-state effect size

enum class PowerState { BareIdle, CudaActive };

inline PowerState classify_state(const TelemetrySample& s,
                                 double clock_threshold_mhz = kDefaultClockThresholdMhz) {
  return s.sm_clock_mhz >= clock_threshold_mhz ? PowerState::CudaActive : PowerState::BareIdle;
}

struct TwoStateResult {
  double mean_bare_w = 0;
  double mean_ctx_w = 0;
  double delta_w = 0;
  double cohens_d = 0;  // +/-inf when both groups have zero variance
  double welch_t = 0;
  double welch_df = 0;
  double welch_p = 1;
  std::size_t n_bare = 0;
  std::size_t n_ctx = 0;

  bool d_overflow() const { return std::isinf(cohens_d); }
};

/// Welch's unequal-variance t-test plus Cohen's d with the equal-weight pooled
/// standard deviation sqrt((s1^2 + s2^2) / 2).
inline TwoStateResult two_state_stats(std::span<const double> bare, std::span<const double> ctx) {
  detail::require(bare.size() >= 2 && ctx.size() >= 2, "each group needs >= 2 samples");
  TwoStateResult r;
  r.n_bare = bare.size();
  r.n_ctx = ctx.size();
  r.mean_bare_w = stats::mean(bare);
  r.mean_ctx_w = stats::mean(ctx);
  r.delta_w = r.mean_ctx_w - r.mean_bare_w;
  const double v1 = stats::variance(bare), v2 = stats::variance(ctx);
  const double pooled = std::sqrt((v1 + v2) / 2);
  const double inf = std::numeric_limits<double>::infinity();
  if (pooled > 0) r.cohens_d = r.delta_w / pooled;
  else r.cohens_d = r.delta_w == 0 ? 0.0 : std::copysign(inf, r.delta_w);

  const double n1 = static_cast<double>(r.n_bare), n2 = static_cast<double>(r.n_ctx);
  const double a = v1 / n1, b = v2 / n2;
  const double se = std::sqrt(a + b);
  if (se > 0) {
    r.welch_t = r.delta_w / se;
    r.welch_df = (a + b) * (a + b) / (a * a / (n1 - 1) + b * b / (n2 - 1));
    r.welch_p = stats::t_two_sided_p(r.welch_t, r.welch_df);
  } else {
    r.welch_df = n1 + n2 - 2;
    r.welch_t = r.delta_w == 0 ? 0.0 : std::copysign(inf, r.delta_w);
    r.welch_p = r.delta_w == 0 ? 1.0 : 0.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dose-response regression and equivalence

struct PhaseRecord {
  double vram_gb = 0;
  std::vector<double> power_samples_w;
  double mean_w = 0;
  double std_w = 0;

  std::size_t n() const { return power_samples_w.size(); }

  static PhaseRecord from_samples(double vram_gb, std::vector<double> power_w) {
    detail::require(!power_w.empty(), "phase needs at least one sample");
    PhaseRecord p{vram_gb, std::move(power_w), 0, 0};
    p.mean_w = stats::mean(p.power_samples_w);
    p.std_w = p.n() >= 2 ? stats::stddev(p.power_samples_w) : 0.0;
    return p;
  }
};

struct RegressionResult {
  double slope_w_per_gb = 0;
  double intercept_w = 0;
  double se_slope = 0;
  double ci95_lo = 0;
  double ci95_hi = 0;
  double t_stat = 0;
  double p_two_sided = 1;
  double r_squared = 0;
  std::size_t n_phases = 0;
};

/// OLS of phase-mean power on VRAM with t inference on n-2 degrees of freedom.
inline RegressionResult dose_response(const std::vector<PhaseRecord>& phases) {
  detail::require(phases.size() >= 3, "dose-response needs >= 3 phases");
  const double n = static_cast<double>(phases.size());
  double mx = 0, my = 0;
  for (const auto& p : phases) {
    mx += p.vram_gb;
    my += p.mean_w;
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : phases) {
    sxx += (p.vram_gb - mx) * (p.vram_gb - mx);
    sxy += (p.vram_gb - mx) * (p.mean_w - my);
    syy += (p.mean_w - my) * (p.mean_w - my);
  }
  detail::require(sxx > 0, "dose-response needs distinct VRAM levels");

  RegressionResult r;
  r.n_phases = phases.size();
  r.slope_w_per_gb = sxy / sxx;
  r.intercept_w = my - r.slope_w_per_gb * mx;
  double ssr = 0;
  for (const auto& p : phases) {
    const double e = p.mean_w - (r.intercept_w + r.slope_w_per_gb * p.vram_gb);
    ssr += e * e;
  }
  const double df = n - 2;
  r.se_slope = std::sqrt(ssr / df / sxx);
  r.r_squared = syy > 0 ? std::max(0.0, 1 - ssr / syy) : 1.0;
  const double inf = std::numeric_limits<double>::infinity();
  if (r.se_slope > 0) {
    r.t_stat = r.slope_w_per_gb / r.se_slope;
    r.p_two_sided = stats::t_two_sided_p(r.t_stat, df);
  } else {
    r.t_stat = r.slope_w_per_gb == 0 ? 0.0 : std::copysign(inf, r.slope_w_per_gb);
    r.p_two_sided = r.slope_w_per_gb == 0 ? 1.0 : 0.0;
  }
  const double tcrit = stats::t_quantile(0.975, df);
  r.ci95_lo = r.slope_w_per_gb - tcrit * r.se_slope;
  r.ci95_hi = r.slope_w_per_gb + tcrit * r.se_slope;
  return r;
}

struct EquivalenceResult {
  double bound_w_per_gb = 0;
  double p_lower = 1;  // H0: slope <= -bound
  double p_upper = 1;  // H0: slope >= +bound
  double p_tost = 1;
  bool equivalent = false;
};

/// Two one-sided tests on the regression slope against +/-bound.
inline EquivalenceResult tost(const RegressionResult& reg, double bound_w_per_gb,
                              double alpha = 0.05) {
  detail::require(bound_w_per_gb > 0, "equivalence bound must be > 0");
  detail::require(reg.n_phases >= 3, "TOST needs a regression on >= 3 phases");
  const double df = static_cast<double>(reg.n_phases) - 2;
  const double b = reg.slope_w_per_gb;
  EquivalenceResult e;
  e.bound_w_per_gb = bound_w_per_gb;
  if (reg.se_slope > 0) {
    e.p_lower = stats::t_sf((b + bound_w_per_gb) / reg.se_slope, df);
    e.p_upper = stats::t_cdf((b - bound_w_per_gb) / reg.se_slope, df);
  } else {
    e.p_lower = b > -bound_w_per_gb ? 0.0 : 1.0;
    e.p_upper = b < bound_w_per_gb ? 0.0 : 1.0;
  }
  e.p_tost = std::max(e.p_lower, e.p_upper);
  e.equivalent = e.p_tost < alpha;
  return e;
}

// ---------------------------------------------------------------------------
// Autocorrelation

struct EffSampleSize {
  std::size_t n_raw = 0;
  std::size_t tau_samples = 0;
  std::size_t n_eff = 0;
};

inline EffSampleSize effective_n(std::size_t n_raw, std::size_t tau_samples) {
  detail::require(n_raw >= 1, "n_raw must be >= 1");
  const double n_eff =
      std::round(static_cast<double>(n_raw) / (2.0 * static_cast<double>(tau_samples) + 1.0));
  return {n_raw, tau_samples, static_cast<std::size_t>(n_eff)};
}

/// Smallest lag at which the sample autocorrelation falls below 1/e, capped at n/4.
inline std::size_t estimate_tau(std::span<const double> series) {
  detail::require(series.size() >= 10, "estimate_tau needs >= 10 samples");
  const double m = stats::mean(series);
  double c0 = 0;
  for (double x : series) c0 += (x - m) * (x - m);
  if (c0 == 0) return 0;
  const std::size_t cap = series.size() / 4;
  const double threshold = std::exp(-1.0);
  for (std::size_t k = 1; k <= cap; ++k) {
    double ck = 0;
    for (std::size_t i = 0; i + k < series.size(); ++i) ck += (series[i] - m) * (series[i + k] - m);
    if (ck / c0 < threshold) return k;
  }
  return cap;
}

// ---------------------------------------------------------------------------
// Synthetic telemetry

struct SchedulePhase {
  double vram_gb = 0;
  bool ctx = true;
  double duration_s = 1200;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SchedulePhase, vram_gb, ctx, duration_s)

struct TelemetrySchedule {
  std::vector<std::string> gpu_ids{"gpu0"};
  std::vector<SchedulePhase> phases;
};

inline void from_json(const nlohmann::json& j, TelemetrySchedule& s) {
  if (j.contains("gpu_ids")) j.at("gpu_ids").get_to(s.gpu_ids);
  j.at("phases").get_to(s.phases);
}

inline void to_json(nlohmann::json& j, const TelemetrySchedule& s) {
  j = nlohmann::json{{"gpu_ids", s.gpu_ids}, {"phases", s.phases}};
}

/// Samples the idle-power model every 30 s through the schedule, adding
/// Gaussian noise and a linear drift in time. Each GPU id gets its own stream.
inline std::vector<TelemetrySample> gen_telemetry(const GpuProfile& profile,
                                                  const TelemetrySchedule& schedule,
                                                  double noise_std_w, double drift_w_per_hr,
                                                  std::uint64_t seed) {
  detail::require(noise_std_w >= 0, "noise std must be >= 0");
  detail::require(!schedule.gpu_ids.empty(), "schedule needs at least one gpu id");
  for (const auto& ph : schedule.phases) {
    detail::require(ph.duration_s >= kTelemetryCadenceS, "phase shorter than one sample interval");
    (void)idle_power(profile, ph.ctx, ph.vram_gb);  // range checks
  }
  std::vector<TelemetrySample> out;
  for (std::size_t g = 0; g < schedule.gpu_ids.size(); ++g) {
    std::mt19937_64 rng(seed + g);
    std::normal_distribution<double> noise(0.0, noise_std_w);
    double t = 0;
    for (const auto& ph : schedule.phases) {
      const double level = idle_power(profile, ph.ctx, ph.vram_gb);
      const auto n = static_cast<std::size_t>(std::floor(ph.duration_s / kTelemetryCadenceS));
      for (std::size_t i = 0; i < n; ++i, t += kTelemetryCadenceS) {
        double p = level + drift_w_per_hr * t / 3600.0;
        if (noise_std_w > 0) p += noise(rng);
        out.push_back({t, schedule.gpu_ids[g], p,
                       ph.ctx ? profile.sm_clock_ctx_mhz : profile.sm_clock_idle_mhz,
                       ph.ctx ? ph.vram_gb : 0.0, 0.0});
      }
    }
  }
  return out;
}

/// Evenly spaced context-active phases from 0 to max_vram_gb, preceded by one
/// bare-idle phase.
inline TelemetrySchedule dose_schedule(double max_vram_gb, std::size_t levels,
                                       double phase_s = 1200, bool bare_baseline = true) {
  detail::require(levels >= 2, "need >= 2 VRAM levels");
  TelemetrySchedule s;
  if (bare_baseline) s.phases.push_back({0, false, phase_s});
  for (std::size_t i = 0; i < levels; ++i)
    s.phases.push_back(
        {max_vram_gb * static_cast<double>(i) / static_cast<double>(levels - 1), true, phase_s});
  return s;
}

// ---------------------------------------------------------------------------
// End-to-end analysis

/// Groups one GPU's context-active samples into phases by VRAM level, in
/// order of first appearance.
inline std::vector<PhaseRecord> phases_from_samples(const std::vector<TelemetrySample>& samples,
                                                    const std::string& gpu_id,
                                                    double clock_threshold_mhz) {
  std::vector<double> levels;
  std::vector<std::vector<double>> powers;
  for (const auto& s : samples) {
    if (s.gpu_id != gpu_id || classify_state(s, clock_threshold_mhz) != PowerState::CudaActive)
      continue;
    auto it = std::find(levels.begin(), levels.end(), s.vram_used_gb);
    if (it == levels.end()) {
      levels.push_back(s.vram_used_gb);
      powers.emplace_back();
      it = levels.end() - 1;
    }
    powers[static_cast<std::size_t>(it - levels.begin())].push_back(s.power_w);
  }
  std::vector<PhaseRecord> out;
  for (std::size_t i = 0; i < levels.size(); ++i)
    out.push_back(PhaseRecord::from_samples(levels[i], std::move(powers[i])));
  return out;
}

struct GpuAnalysis {
  std::string gpu_id;
  std::size_t n_phases = 0;
  std::optional<RegressionResult> regression;
  std::optional<EquivalenceResult> equivalence;
  std::string note;
};

struct AnalysisReport {
  std::size_t total_rows = 0;
  std::size_t retained = 0;
  double retention_fraction = 0;
  std::size_t n_bare = 0;
  std::size_t n_ctx = 0;
  std::optional<TwoStateResult> two_state;
  std::vector<GpuAnalysis> per_gpu;
  std::vector<std::string> warnings;
};

inline AnalysisReport analyze(const IngestResult& data, double clock_threshold_mhz,
                              double tost_bound_w_per_gb) {
  AnalysisReport rep;
  rep.total_rows = data.total_rows;
  rep.retained = data.retained;
  rep.retention_fraction = data.retention_fraction;
  rep.warnings = data.warnings;

  std::vector<double> bare, ctx;
  std::vector<std::string> gpus;
  for (const auto& s : data.samples) {
    (classify_state(s, clock_threshold_mhz) == PowerState::CudaActive ? ctx : bare)
        .push_back(s.power_w);
    if (std::find(gpus.begin(), gpus.end(), s.gpu_id) == gpus.end()) gpus.push_back(s.gpu_id);
  }
  rep.n_bare = bare.size();
  rep.n_ctx = ctx.size();
  if (bare.size() >= 2 && ctx.size() >= 2) rep.two_state = two_state_stats(bare, ctx);
  else rep.warnings.push_back("two-state statistics skipped: need >= 2 samples per state");

  for (const auto& id : gpus) {
    GpuAnalysis g{id, 0, std::nullopt, std::nullopt, {}};
    const auto phases = phases_from_samples(data.samples, id, clock_threshold_mhz);
    g.n_phases = phases.size();
    if (phases.size() >= 3) {
      g.regression = dose_response(phases);
      g.equivalence = tost(*g.regression, tost_bound_w_per_gb);
    } else {
      g.note = "fewer than 3 context-active VRAM levels; regression skipped";
    }
    rep.per_gpu.push_back(std::move(g));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {
// JSON has no infinity; emit null and let a flag carry the meaning.
inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}
}  // namespace detail

inline void to_json(nlohmann::json& j, const TwoStateResult& r) {
  j = {{"mean_bare_w", r.mean_bare_w},
       {"mean_ctx_w", r.mean_ctx_w},
       {"delta_w", r.delta_w},
       {"cohens_d", detail::finite_or_null(r.cohens_d)},
       {"cohens_d_overflow", r.d_overflow()},
       {"welch_t", detail::finite_or_null(r.welch_t)},
       {"welch_df", r.welch_df},
       {"welch_p", r.welch_p},
       {"n_bare", r.n_bare},
       {"n_ctx", r.n_ctx}};
}

inline void to_json(nlohmann::json& j, const RegressionResult& r) {
  j = {{"slope_w_per_gb", r.slope_w_per_gb},
       {"intercept_w", r.intercept_w},
       {"se_slope", r.se_slope},
       {"ci95_lo", r.ci95_lo},
       {"ci95_hi", r.ci95_hi},
       {"t_stat", detail::finite_or_null(r.t_stat)},
       {"p_two_sided", r.p_two_sided},
       {"r_squared", r.r_squared},
       {"n_phases", r.n_phases}};
}

inline void to_json(nlohmann::json& j, const EquivalenceResult& e) {
  j = {{"bound_w_per_gb", e.bound_w_per_gb},
       {"p_lower", e.p_lower},
       {"p_upper", e.p_upper},
       {"p_tost", e.p_tost},
       {"equivalent", e.equivalent}};
}

inline void to_json(nlohmann::json& j, const AnalysisReport& r) {
  j = {{"retention", {{"total_rows", r.total_rows},
                      {"retained", r.retained},
                      {"retention_fraction", r.retention_fraction}}},
       {"n_bare", r.n_bare},
       {"n_ctx", r.n_ctx},
       {"two_state", nullptr},
       {"per_gpu", nlohmann::json::array()},
       {"warnings", r.warnings}};
  if (r.two_state) j["two_state"] = *r.two_state;
  for (const auto& g : r.per_gpu) {
    nlohmann::json gj = {{"gpu_id", g.gpu_id},
                         {"n_phases", g.n_phases},
                         {"regression", nullptr},
                         {"equivalence", nullptr}};
    if (g.regression) gj["regression"] = *g.regression;
    if (g.equivalence) gj["equivalence"] = *g.equivalence;
    if (!g.note.empty()) gj["note"] = g.note;
    j["per_gpu"].push_back(std::move(gj));
  }
}

}  // namespace parktax
