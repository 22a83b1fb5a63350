// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "parktax/breakeven.hpp"
#include "parktax/error.hpp"
#include "parktax/eviction_sim.hpp"
#include "parktax/impact.hpp"
#include "parktax/power_model.hpp"
#include "parktax/reproduce.hpp"
#include "parktax/telemetry.hpp"
#include "parktax/traffic.hpp"

namespace parktax::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kDomainError = 1, kUsageError = 2 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Value parsing

/// Seconds from "24h", "90m", "300s" or a bare number of seconds.
inline double parse_duration(const std::string& text) {
  if (text.empty()) throw UsageError("empty duration");
  double scale = 1;
  std::string num = text;
  switch (text.back()) {
    case 'h': scale = 3600; num.pop_back(); break;
    case 'm': scale = 60; num.pop_back(); break;
    case 's': num.pop_back(); break;
    default: break;
  }
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(num, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != num.size() || !std::isfinite(v))
    throw UsageError("bad duration '" + text + "' (use e.g. 24h, 90m, 300s)");
  return v * scale;
}

/// Requests/hour from "5", "5/hr" or "0.0014/s".
inline double parse_rate_per_hr(const std::string& text) {
  double scale = 1;
  std::string num = text;
  auto ends_with = [&](const std::string& suf) {
    return num.size() >= suf.size() && num.compare(num.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends_with("/hr")) {
    num.resize(num.size() - 3);
  } else if (ends_with("/s")) {
    num.resize(num.size() - 2);
    scale = kSecondsPerHour;
  }
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(num, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != num.size() || !std::isfinite(v))
    throw UsageError("bad rate '" + text + "' (use e.g. 5, 5/hr, 0.001/s)");
  return v * scale;
}

inline double parse_number(const std::string& text, const std::string& what) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || !std::isfinite(v))
    throw UsageError("bad " + what + " '" + text + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
  return out;
}

/// steady:<rate> | bursty:<low>,<high>[,<period>,<duty>] | diurnal:<peak>[,<cycle>,<floor>[,peak]].
/// Returns nullopt when the text does not name a pattern (then it is a trace path).
inline std::optional<TrafficSpec> parse_traffic_spec(const std::string& text, double duration_s) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) return std::nullopt;
  const auto kind = detail::lower(text.substr(0, colon));
  const auto args = split(text.substr(colon + 1), ',');
  auto arg = [&](std::size_t i) -> const std::string& {
    if (i >= args.size()) throw UsageError("traffic spec '" + text + "' is missing arguments");
    return args[i];
  };
  if (kind == "steady") {
    if (args.size() != 1) throw UsageError("steady takes one rate: steady:<rate>");
    return TrafficSpec{Steady{parse_rate_per_hr(arg(0))}, duration_s};
  }
  if (kind == "bursty") {
    if (args.size() != 2 && args.size() != 4)
      throw UsageError("bursty takes <low>,<high>[,<period>,<duty>]");
    Bursty b{parse_rate_per_hr(arg(0)), parse_rate_per_hr(arg(1))};
    if (args.size() == 4) {
      b.period_s = parse_duration(arg(2));
      b.low_duty = parse_number(arg(3), "duty");
    }
    return TrafficSpec{b, duration_s};
  }
  if (kind == "diurnal") {
    if (args.empty() || args.size() == 2 || args.size() > 4)
      throw UsageError("diurnal takes <peak>[,<cycle>,<floor>[,peak|trough]]");
    Diurnal d{parse_rate_per_hr(arg(0))};
    if (args.size() >= 3) {
      d.cycle_s = parse_duration(arg(1));
      d.floor_per_hr = parse_rate_per_hr(arg(2));
    }
    if (args.size() == 4) {
      if (args[3] != "peak" && args[3] != "trough") throw UsageError("diurnal phase must be peak or trough");
      d.peak_first = args[3] == "peak";
    }
    return TrafficSpec{d, duration_s};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Output helpers

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path.string());
  out << text;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline std::string timeline_csv(const std::vector<Segment>& timeline) {
  std::ostringstream os;
  os << "t_start,t_end,state,power_w\n" << std::fixed << std::setprecision(6);
  for (const auto& s : timeline)
    os << s.t_start << ',' << s.t_end << ',' << to_string(s.state) << ',' << s.power_w << "\n";
  return os.str();
}

/// Writes run_manifest.json next to every distinct output directory.
inline void write_manifest(const std::string& subcommand, const std::vector<std::string>& argv,
                           const nlohmann::json& config,
                           const std::vector<std::filesystem::path>& outputs) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& o : outputs) {
    auto dir = o.has_parent_path() ? o.parent_path() : std::filesystem::path(".");
    if (std::find(dirs.begin(), dirs.end(), dir) == dirs.end()) dirs.push_back(dir);
  }
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : outputs) outs.push_back(o.string());
  const nlohmann::json manifest = {{"schema_version", kSchemaVersion},
                                   {"tool", "parktax"},
                                   {"version", kVersion},
                                   {"subcommand", subcommand},
                                   {"argv", argv},
                                   {"config", config},
                                   {"outputs", outs}};
  for (const auto& d : dirs) write_json(d / "run_manifest.json", manifest);
}

/// Arguments recorded in a manifest, ready to be passed back to run().
inline std::vector<std::string> manifest_argv(const std::filesystem::path& manifest) {
  const auto j = detail::read_json_file(manifest);
  if (!j.contains("argv")) throw DomainError(manifest.string() + " has no argv");
  return j.at("argv").get<std::vector<std::string>>();
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// ---------------------------------------------------------------------------

struct LoadOptions {
  std::optional<double> power_w;
  std::optional<std::string> time;
  std::string profile = "pytorch-70b";

  LoadProfile resolve() const {
    if (power_w || time) {
      if (!power_w || !time) throw UsageError("--load-power and --load-time go together");
      return LoadProfile::constant(*power_w, parse_duration(*time), "constant");
    }
    return resolve_load(profile);
  }
};

inline void add_load_options(CLI::App* cmd, LoadOptions& o) {
  auto* lp = cmd->add_option("--load-power", o.power_w, "Constant loading power (W)");
  auto* lt = cmd->add_option("--load-time", o.time, "Loading duration (e.g. 45s)");
  cmd->add_option("--load-profile", o.profile,
                  "Built-in loader label or JSON load profile path")
      ->capture_default_str()
      ->excludes(lp)
      ->excludes(lt);
}

inline nlohmann::json describe(const GpuProfile& p) { return nlohmann::json(p); }
inline nlohmann::json describe(const LoadProfile& l) { return nlohmann::json(l); }

struct Runner {
  Runner(std::ostream& o, std::ostream& e, std::vector<std::string> args)
      : out(o), err(e), argv(std::move(args)) {}

  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> argv;

  // Shared option storage; each subcommand reads only its own.
  std::string profile = "h100";
  LoadOptions load;
  std::string policy = "breakeven";
  std::vector<std::string> policies;
  std::string traffic = "steady:5";
  std::string duration = "24h";
  std::uint64_t seed = 1;
  std::size_t n_seeds = 1;
  std::string out_path;
  std::string json_path;
  std::string timeline_path;
  bool no_initial_load = false;

  std::string pattern = "steady";
  std::string rate = "5", low = "2", high = "60", period = "2h", peak = "30", cycle = "24h",
              floor_rate = "2", phase = "trough";
  double duty = 0.7;

  std::string schedule_path;
  double noise = 0.17;
  double drift = 0;
  std::string input_path;
  double util_max = 0;
  double clock_threshold = kDefaultClockThresholdMhz;
  double tost_bound = 0.1;

  std::optional<double> fleet, utilization, park_power;
  double grid_intensity = kDefaultGridIntensityKgPerKwh;
  double hours = kHoursPerYear;
  std::vector<std::string> sensitivity;

  std::string table;
  std::size_t repro_seeds = 20;

  // ---- breakeven
  int cmd_breakeven() {
    const auto p = resolve_profile(profile);
    const auto l = load.resolve();
    const auto be = breakeven(p, l);
    out << std::fixed << std::setprecision(1) << "T* = " << be.t_star_s << " s ("
        << be.t_star_min() << " min), λ* = " << be.lambda_star_per_hr() << "/hr\n";
    out << "  profile " << p.name << ", parking tax " << be.park_w << " W, load energy "
        << std::setprecision(0) << be.load_energy_j << " J\n";
    if (!json_path.empty()) {
      const nlohmann::json j = {{"schema_version", kSchemaVersion},
                                {"profile", p.name},
                                {"park_w", be.park_w},
                                {"load", describe(l)},
                                {"load_energy_j", be.load_energy_j},
                                {"t_star_s", be.t_star_s},
                                {"t_star_min", be.t_star_min()},
                                {"lambda_star_per_s", be.lambda_star_per_s},
                                {"lambda_star_per_hr", be.lambda_star_per_hr()}};
      write_json(json_path, j);
      write_manifest("breakeven", argv, {{"profile", describe(p)}, {"load", describe(l)}},
                     {json_path});
    }
    return kOk;
  }

  // ---- gen-traffic
  TrafficSpec traffic_from_flags() const {
    const double d = parse_duration(duration);
    if (pattern == "steady") return {Steady{parse_rate_per_hr(rate)}, d};
    if (pattern == "bursty")
      return {Bursty{parse_rate_per_hr(low), parse_rate_per_hr(high), parse_duration(period), duty}, d};
    return {Diurnal{parse_rate_per_hr(peak), parse_duration(cycle), parse_rate_per_hr(floor_rate),
                    phase == "peak"},
            d};
  }

  int cmd_gen_traffic() {
    const auto spec = traffic_from_flags();
    const auto tr = generate(spec, seed);
    std::ostringstream os;
    save_trace(tr, os);
    write_text(out_path, os.str());
    write_manifest("gen-traffic", argv,
                   {{"spec", tr.spec_label}, {"duration_s", spec.duration_s}, {"seed", seed},
                    {"expected_count", expected_count(spec)}},
                   {out_path});
    out << "wrote " << tr.size() << " arrivals (" << tr.spec_label << ", seed " << seed << ") to "
        << out_path << "\n";
    return kOk;
  }

  // ---- simulate / compare
  struct TrafficSource {
    std::optional<TrafficSpec> spec;
    std::optional<ArrivalTrace> file;

    ArrivalTrace trace(std::uint64_t s) const { return spec ? generate(*spec, s) : *file; }
    std::string label() const { return spec ? parktax::label(*spec) : file->spec_label; }
  };

  TrafficSource resolve_traffic(double duration_s) const {
    if (auto spec = parse_traffic_spec(traffic, duration_s)) return {spec, std::nullopt};
    if (!std::filesystem::exists(traffic))
      throw UsageError("--traffic '" + traffic + "' is neither a pattern spec nor a trace file");
    return {std::nullopt, load_trace(traffic)};
  }

  int cmd_simulate() {
    const double d = parse_duration(duration);
    const auto p = resolve_profile(profile);
    const auto l = load.resolve();
    const auto pol = parse_policy(policy);
    const auto src = resolve_traffic(d);
    const auto trace = src.trace(seed);
    const auto run = simulate_timeline({p, l, pol, trace, d, !no_initial_load});
    const auto& r = run.result;

    out << std::fixed << std::setprecision(1) << policy_label(pol) << " on " << src.label() << ": "
        << r.energy_wh << " Wh, " << r.cold_starts << " cold starts, " << r.total_requests
        << " requests, avg added latency " << std::setprecision(2) << r.avg_added_latency_s
        << " s\n";

    std::vector<std::filesystem::path> outputs;
    nlohmann::json j = r;
    j["schema_version"] = kSchemaVersion;
    j["policy"] = policy_label(pol);
    j["traffic"] = src.label();
    j["seed"] = seed;
    if (!out_path.empty()) {
      write_json(out_path, j);
      outputs.emplace_back(out_path);
    } else {
      out << j.dump(2) << "\n";
    }
    if (!timeline_path.empty()) {
      write_text(timeline_path, timeline_csv(run.timeline));
      outputs.emplace_back(timeline_path);
    }
    if (!outputs.empty())
      write_manifest("simulate", argv,
                     {{"profile", describe(p)}, {"load", describe(l)}, {"policy", policy_label(pol)},
                      {"traffic", src.label()}, {"duration_s", d}, {"seed", seed},
                      {"count_initial_load", !no_initial_load}},
                     outputs);
    return kOk;
  }

  int cmd_compare() {
    const double d = parse_duration(duration);
    const auto p = resolve_profile(profile);
    const auto l = load.resolve();
    std::vector<Policy> pols;
    for (const auto& item : policies)
      for (const auto& s : split(item, ';')) pols.push_back(parse_policy(s));
    if (pols.empty()) pols = {AlwaysOn{}, FixedTTL{300}, BreakevenTTL{}};
    const auto src = resolve_traffic(d);
    const std::size_t n = src.spec ? std::max<std::size_t>(n_seeds, 1) : 1;

    std::vector<std::vector<SimResult>> per_seed;
    for (std::size_t k = 0; k < n; ++k)
      per_seed.push_back(compare_policies(p, l, src.trace(seed + k), pols, d, !no_initial_load));

    nlohmann::json j = {{"schema_version", kSchemaVersion},
                        {"profile", p.name},
                        {"traffic", src.label()},
                        {"seeds", nlohmann::json::array()},
                        {"policies", nlohmann::json::array()}};
    for (std::size_t k = 0; k < n; ++k) j["seeds"].push_back(seed + k);
    out << std::left << std::setw(22) << "policy" << std::right << std::setw(12) << "energy_wh"
        << std::setw(10) << "savings%" << std::setw(13) << "cold_starts" << std::setw(12)
        << "latency_s" << "\n";
    for (std::size_t i = 0; i < pols.size(); ++i) {
      double e = 0, s = 0, c = 0, lat = 0;
      nlohmann::json runs = nlohmann::json::array();
      for (const auto& res : per_seed) {
        e += res[i].energy_wh;
        s += *res[i].savings_vs_always_on_pct;
        c += static_cast<double>(res[i].cold_starts);
        lat += res[i].avg_added_latency_s;
        runs.push_back(res[i]);
      }
      const double dn = static_cast<double>(n);
      out << std::left << std::setw(22) << policy_label(pols[i]) << std::right << std::fixed
          << std::setprecision(1) << std::setw(12) << e / dn << std::setw(10) << s / dn
          << std::setw(13) << c / dn << std::setprecision(2) << std::setw(12) << lat / dn << "\n";
      j["policies"].push_back({{"policy", policy_label(pols[i])},
                               {"mean_energy_wh", e / dn},
                               {"mean_savings_pct", s / dn},
                               {"mean_cold_starts", c / dn},
                               {"mean_added_latency_s", lat / dn},
                               {"runs", runs}});
    }
    if (!out_path.empty()) {
      write_json(out_path, j);
      nlohmann::json labels = nlohmann::json::array();
      for (const auto& pol : pols) labels.push_back(policy_label(pol));
      write_manifest("compare", argv,
                     {{"profile", describe(p)}, {"load", describe(l)}, {"policies", labels},
                      {"traffic", src.label()}, {"duration_s", d}, {"seed", seed}, {"n_seeds", n},
                      {"count_initial_load", !no_initial_load}},
                     {out_path});
    }
    return kOk;
  }

  // ---- telemetry
  int cmd_gen_telemetry() {
    const auto p = resolve_profile(profile);
    TelemetrySchedule sched;
    try {
      sched = detail::read_json_file(schedule_path).get<TelemetrySchedule>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(schedule_path + ": " + e.what(), {});
    }
    const auto samples = gen_telemetry(p, sched, noise, drift, seed);
    std::ostringstream os;
    write_telemetry_csv(samples, os);
    write_text(out_path, os.str());
    write_manifest("gen-telemetry", argv,
                   {{"profile", describe(p)}, {"schedule", sched}, {"noise_std_w", noise},
                    {"drift_w_per_hr", drift}, {"seed", seed}},
                   {out_path});
    out << "wrote " << samples.size() << " samples to " << out_path << "\n";
    return kOk;
  }

  int cmd_analyze() {
    const auto data = ingest(std::filesystem::path(input_path), util_max);
    for (const auto& w : data.warnings) err << "warning: " << w << "\n";
    const auto rep = analyze(data, clock_threshold, tost_bound);
    for (const auto& w : rep.warnings)
      if (std::find(data.warnings.begin(), data.warnings.end(), w) == data.warnings.end())
        err << "warning: " << w << "\n";

    out << std::fixed << std::setprecision(1) << "retained " << rep.retained << " / "
        << rep.total_rows << " rows (" << 100 * rep.retention_fraction << "%)\n";
    if (rep.two_state) {
      const auto& t = *rep.two_state;
      out << "context effect " << t.delta_w << " W (bare " << t.mean_bare_w << " W, ctx "
          << t.mean_ctx_w << " W), Cohen's d ";
      if (t.d_overflow()) out << "overflow";
      else out << std::setprecision(2) << t.cohens_d;
      out << ", Welch p " << std::scientific << std::setprecision(2) << t.welch_p << std::fixed
          << "\n";
    }
    for (const auto& g : rep.per_gpu) {
      out << g.gpu_id << ": ";
      if (g.regression) {
        out << std::setprecision(4) << "slope " << g.regression->slope_w_per_gb << " W/GB [95% CI "
            << g.regression->ci95_lo << ", " << g.regression->ci95_hi << "], p "
            << g.regression->p_two_sided << ", p_TOST " << std::scientific << std::setprecision(2)
            << g.equivalence->p_tost << std::fixed
            << (g.equivalence->equivalent ? " (equivalent)" : " (not equivalent)") << "\n";
      } else {
        out << g.note << "\n";
      }
    }
    if (!out_path.empty()) {
      nlohmann::json j = rep;
      j["schema_version"] = kSchemaVersion;
      j["settings"] = {{"util_max", util_max},
                       {"clock_threshold_mhz", clock_threshold},
                       {"tost_bound_w_per_gb", tost_bound}};
      write_json(out_path, j);
      write_manifest("analyze", argv,
                     {{"input", input_path}, {"util_max", util_max},
                      {"clock_threshold_mhz", clock_threshold}, {"tost_bound_w_per_gb", tost_bound}},
                     {out_path});
    }
    return kOk;
  }

  // ---- impact
  int cmd_impact() {
    nlohmann::json j = {{"schema_version", kSchemaVersion},
                        {"grid_intensity_kg_per_kwh", grid_intensity},
                        {"grid_intensity_note",
                         grid_intensity == kDefaultGridIntensityKgPerKwh
                             ? "default, back-derived from 180 kT CO2 at 462 GWh"
                             : "user supplied"}};
    if (!sensitivity.empty()) {
      if (sensitivity.size() != 3) throw UsageError("--sensitivity takes low.json base.json high.json");
      std::array<FleetScenario, 3> s;
      for (std::size_t i = 0; i < 3; ++i) {
        try {
          s[i] = detail::read_json_file(sensitivity[i]).get<FleetScenario>();
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(sensitivity[i] + ": " + e.what(), {});
        }
      }
      const auto g = sensitivity_grid(s[0], s[1], s[2]);
      const char* names[] = {"low", "base", "high"};
      out << std::fixed;
      for (std::size_t i = 0; i < 3; ++i) {
        out << names[i] << ": " << std::llround(g.energy_gwh[i]) << " GWh/yr, "
            << std::setprecision(1) << g.co2_kt[i] << " kT CO2\n";
        j["grid"][names[i]] = {{"scenario", s[i]},
                               {"energy_gwh", g.energy_gwh[i]},
                               {"energy_gwh_rounded", std::llround(g.energy_gwh[i])},
                               {"co2_kt", g.co2_kt[i]}};
      }
    } else {
      if (!fleet || !utilization || !park_power)
        throw UsageError("impact needs --fleet, --utilization and --park-power (or --sensitivity)");
      const FleetScenario s{*fleet, *utilization, *park_power, hours, grid_intensity};
      const double e = annual_parking_energy(s);
      const double kt = co2(e, grid_intensity);
      out << std::llround(e) << " GWh/yr (" << std::fixed << std::setprecision(1) << kt
          << " kT CO2)\n";
      j["scenario"] = s;
      j["energy_gwh"] = e;
      j["energy_gwh_rounded"] = std::llround(e);
      j["co2_kt"] = kt;
    }
    if (!out_path.empty()) {
      write_json(out_path, j);
      write_manifest("impact", argv, j, {out_path});
    }
    return kOk;
  }

  // ---- reproduce
  int cmd_reproduce() {
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < repro_seeds; ++i) seeds.push_back(seed + i);
    const auto rep = repro::run(table, seeds);
    const std::filesystem::path dir = out_path.empty() ? "reproduce_out" : out_path;
    const auto csv_path = dir / (table + ".csv");
    const auto cmp_path = dir / (table + "_comparison.json");
    write_text(csv_path, rep.csv);
    nlohmann::json cmp = {{"schema_version", kSchemaVersion}, {"table", table},
                          {"seeds", seeds}, {"all_pass", rep.all_pass()},
                          {"checks", nlohmann::json::array()}};
    for (const auto& c : rep.checks) {
      nlohmann::json cj = {{"item", c.item}, {"computed", c.computed}, {"published", c.published}};
      if (c.pass) {
        cj["tolerance"] = c.tolerance;
        cj["pass"] = *c.pass;
      }
      cmp["checks"].push_back(cj);
    }
    write_json(cmp_path, cmp);
    write_manifest("reproduce", argv, {{"table", table}, {"seeds", seeds}}, {csv_path, cmp_path});
    repro::print_checks(rep, out);
    out << (rep.all_pass() ? "all checks pass" : "SOME CHECKS FAIL") << "; wrote " << csv_path.string()
        << "\n";
    return kOk;
  }
};

/// Closest long option name (edit distance <= 3) for an unknown flag, searched
/// in the invoked subcommand and the top-level app.
inline std::optional<std::string> suggest(const CLI::App& app, const std::vector<std::string>& args,
                                          const std::string& unknown) {
  std::vector<const CLI::App*> scopes{&app};
  for (const auto& a : args)
    for (const auto* sub : app.get_subcommands({}))
      if (sub->get_name() == a) scopes.push_back(sub);
  const std::string flag = unknown.substr(2, unknown.find('=') - 2);
  std::optional<std::string> best;
  std::size_t best_d = 4;
  for (const auto* scope : scopes)
    for (const auto* opt : scope->get_options())
      for (const auto& name : opt->get_lnames()) {
        if (name == flag) return std::nullopt;  // known flag
        const auto d = edit_distance(flag, name);
        if (d < best_d) {
          best_d = d;
          best = "--" + name;
        }
      }
  return best;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  Runner r{out, err, args};
  CLI::App app{"Model parking tax toolkit: GPU idle power, cold-start breakeven, "
               "eviction simulation, telemetry statistics and fleet impact",
               "parktax"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string replay;
  app.add_option("--replay", replay, "Re-run the command recorded in a run_manifest.json");

  auto* be = app.add_subcommand("breakeven", "Breakeven idle time and critical arrival rate");
  be->add_option("--profile", r.profile, "Built-in GPU name or profile JSON")->capture_default_str();
  add_load_options(be, r.load);
  be->add_option("--json", r.json_path, "Also write the result as JSON");

  auto* gt = app.add_subcommand("gen-traffic", "Generate a synthetic arrival trace");
  gt->add_option("--pattern", r.pattern)
      ->check(CLI::IsMember({"steady", "bursty", "diurnal"}))
      ->capture_default_str();
  gt->add_option("--duration", r.duration)->capture_default_str();
  gt->add_option("--seed", r.seed)->capture_default_str();
  gt->add_option("--rate", r.rate, "steady: requests/hour")->capture_default_str();
  gt->add_option("--low", r.low, "bursty: low rate")->capture_default_str();
  gt->add_option("--high", r.high, "bursty: high rate")->capture_default_str();
  gt->add_option("--period", r.period, "bursty: alternation period")->capture_default_str();
  gt->add_option("--duty", r.duty, "bursty: fraction of each period at the low rate")
      ->capture_default_str();
  gt->add_option("--peak", r.peak, "diurnal: peak rate")->capture_default_str();
  gt->add_option("--cycle", r.cycle, "diurnal: cycle length")->capture_default_str();
  gt->add_option("--floor", r.floor_rate, "diurnal: trough rate")->capture_default_str();
  gt->add_option("--phase", r.phase, "diurnal: value at t=0")
      ->check(CLI::IsMember({"trough", "peak"}))
      ->capture_default_str();
  gt->add_option("--out", r.out_path, "Trace file to write")->required();

  auto add_sim_options = [&](CLI::App* cmd) {
    cmd->add_option("--profile", r.profile)->capture_default_str();
    add_load_options(cmd, r.load);
    cmd->add_option("--traffic", r.traffic, "Pattern spec (steady:5, bursty:2,60, diurnal:30) or trace file")
        ->capture_default_str();
    cmd->add_option("--duration", r.duration)->capture_default_str();
    cmd->add_option("--seed", r.seed)->capture_default_str();
    cmd->add_flag("--no-initial-load", r.no_initial_load,
                  "Do not count the pre-window load as a cold start");
  };
  auto* sim = app.add_subcommand("simulate", "Simulate one eviction policy");
  add_sim_options(sim);
  sim->add_option("--policy", r.policy,
                  "always-on | ttl:<s> | breakeven | rate:<window_s> | hysteresis:<lo>,<hi>")
      ->capture_default_str();
  sim->add_option("--out", r.out_path, "Result JSON");
  sim->add_option("--emit-timeline", r.timeline_path, "Timeline CSV of state segments");

  auto* cmp = app.add_subcommand("compare", "Compare policies on identical traces");
  add_sim_options(cmp);
  cmp->add_option("--policies", r.policies, "Policies (repeat or separate with ';')");
  cmp->add_option("--seeds", r.n_seeds, "Number of consecutive seeds for pattern traffic")
      ->capture_default_str();
  cmp->add_option("--out", r.out_path, "Result JSON");

  auto* gtel = app.add_subcommand("gen-telemetry", "Generate synthetic idle-power telemetry");
  gtel->add_option("--profile", r.profile)->capture_default_str();
  gtel->add_option("--schedule", r.schedule_path, "Schedule JSON")->required();
  gtel->add_option("--noise", r.noise, "Gaussian noise std (W)")->capture_default_str();
  gtel->add_option("--drift", r.drift, "Linear drift (W/hour)")->capture_default_str();
  gtel->add_option("--seed", r.seed)->capture_default_str();
  gtel->add_option("--out", r.out_path, "Telemetry CSV")->required();

  auto* an = app.add_subcommand("analyze", "Two-state, dose-response and TOST analysis of telemetry");
  an->add_option("--input", r.input_path, "Telemetry CSV")->required();
  an->add_option("--util-max", r.util_max, "Keep rows with util_pct <= this")->capture_default_str();
  an->add_option("--clock-threshold", r.clock_threshold, "SM clock separating idle from context (MHz)")
      ->capture_default_str();
  an->add_option("--tost-bound", r.tost_bound, "Equivalence bound (W/GB)")->capture_default_str();
  an->add_option("--out", r.out_path, "Report JSON");

  auto* im = app.add_subcommand("impact", "Annual fleet parking energy and CO2");
  im->add_option("--fleet", r.fleet, "Number of GPUs");
  im->add_option("--utilization", r.utilization, "Average utilization fraction");
  im->add_option("--park-power", r.park_power, "Fleet-average parking tax (W)");
  im->add_option("--grid-intensity", r.grid_intensity, "kg CO2 per kWh")->capture_default_str();
  im->add_option("--hours", r.hours, "Hours per year")->capture_default_str();
  im->add_option("--sensitivity", r.sensitivity, "low.json base.json high.json")->expected(3);
  im->add_option("--out", r.out_path, "Result JSON");

  auto* rp = app.add_subcommand("reproduce", "Regenerate a published table or figure's data");
  rp->add_option("--table", r.table)->required()->check(CLI::IsMember(repro::table_ids()));
  rp->add_option("--seeds", r.repro_seeds, "Number of seeds")->capture_default_str();
  rp->add_option("--seed", r.seed, "First seed")->capture_default_str();
  rp->add_option("--out", r.out_path, "Output directory")->capture_default_str();

  if (args.size() >= 2 && args[0] == "--replay") {
    try {
      return run(manifest_argv(args[1]), out, err);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kDomainError;
    }
  }

  std::vector<const char*> cargv{"parktax"};
  for (const auto& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ExtrasError& e) {
    err << "error: " << e.what() << "\n";
    for (const auto& a : args)
      if (a.rfind("--", 0) == 0 && a.size() > 2)
        if (auto s = suggest(app, args, a)) err << "  " << a << ": did you mean " << *s << "?\n";
    err << "run 'parktax --help' for usage\n";
    return kUsageError;
  } catch (const CLI::ParseError& e) {
    if (args.empty()) out << app.help();
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*be) return r.cmd_breakeven();
    if (*gt) return r.cmd_gen_traffic();
    if (*sim) return r.cmd_simulate();
    if (*cmp) return r.cmd_compare();
    if (*gtel) return r.cmd_gen_telemetry();
    if (*an) return r.cmd_analyze();
    if (*im) return r.cmd_impact();
    if (*rp) return r.cmd_reproduce();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  }
  return kUsageError;
}

}  // namespace parktax::cli
