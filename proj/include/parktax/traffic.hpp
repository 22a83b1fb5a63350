// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "parktax/breakeven.hpp"
#include "parktax/error.hpp"

namespace parktax {

/// Request arrival times within [0, duration_s), sorted.
struct ArrivalTrace {
  std::vector<double> arrival_times_s;
  double duration_s = 0;
  std::string spec_label;
  std::uint64_t seed = 0;

  std::size_t size() const { return arrival_times_s.size(); }
  bool empty() const { return arrival_times_s.empty(); }

  friend bool operator==(const ArrivalTrace&, const ArrivalTrace&) = default;
};

struct Steady {
  double rate_per_hr = 5;
};

// Alternates within each period: low rate for the first low_duty fraction,
// high rate for the remainder.
struct Bursty {
  double low_per_hr = 2;
  double high_per_hr = 60;
  double period_s = 7200;
  double low_duty = 0.7;
};

// Raised cosine between floor and peak over one cycle. Trough-first unless
// peak_first is set.
struct Diurnal {
  double peak_per_hr = 30;
  double cycle_s = 86400;
  double floor_per_hr = 2;
  bool peak_first = false;
};

struct TrafficSpec {
  std::variant<Steady, Bursty, Diurnal> variant;
  double duration_s = 86400;
};

namespace detail {

inline void check_duration(double duration_s) {
  require(duration_s > 0 && std::isfinite(duration_s), "duration must be > 0");
}

inline void check_rate(double r, const char* what) {
  require(r >= 0 && std::isfinite(r), std::string(what) + " must be >= 0");
}

// Arrivals live on a microsecond grid so that trace files round-trip exactly.
inline double quantize_us(double t) { return std::round(t * 1e6) / 1e6; }

inline void push_arrival(std::vector<double>& out, double t, double duration_s) {
  const double q = quantize_us(t);
  if (q < duration_s) out.push_back(q);
}

// Homogeneous Poisson arrivals on [start, end) appended to out.
template <class Rng>
void poisson_segment(Rng& rng, double rate_per_s, double start, double end, double duration_s,
                     std::vector<double>& out) {
  if (rate_per_s <= 0) return;
  std::exponential_distribution<double> gap(rate_per_s);
  for (double t = start + gap(rng); t < end; t += gap(rng)) push_arrival(out, t, duration_s);
}

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

inline std::string label(const TrafficSpec& spec) {
  using detail::fmt_num;
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Steady>) {
          return "steady:" + fmt_num(v.rate_per_hr);
        } else if constexpr (std::is_same_v<T, Bursty>) {
          return "bursty:" + fmt_num(v.low_per_hr) + "," + fmt_num(v.high_per_hr) + "," +
                 fmt_num(v.period_s) + "," + fmt_num(v.low_duty);
        } else {
          return "diurnal:" + fmt_num(v.peak_per_hr) + "," + fmt_num(v.cycle_s) + "," +
                 fmt_num(v.floor_per_hr) + (v.peak_first ? ",peak" : "");
        }
      },
      spec.variant);
}

inline ArrivalTrace gen_steady(double rate_per_hr, double duration_s, std::uint64_t seed) {
  detail::check_rate(rate_per_hr, "rate");
  detail::check_duration(duration_s);
  std::mt19937_64 rng(seed);
  ArrivalTrace tr{{}, duration_s, label({Steady{rate_per_hr}, duration_s}), seed};
  detail::poisson_segment(rng, rate_per_hr / kSecondsPerHour, 0.0, duration_s, duration_s,
                          tr.arrival_times_s);
  return tr;
}

inline ArrivalTrace gen_bursty(double low_per_hr, double high_per_hr, double period_s,
                               double low_duty, double duration_s, std::uint64_t seed) {
  detail::check_rate(low_per_hr, "low rate");
  detail::check_rate(high_per_hr, "high rate");
  detail::require(period_s > 0 && std::isfinite(period_s), "period must be > 0");
  detail::require(low_duty > 0 && low_duty < 1, "low duty fraction must be in (0, 1)");
  detail::check_duration(duration_s);

  const Bursty b{low_per_hr, high_per_hr, period_s, low_duty};
  ArrivalTrace tr{{}, duration_s, label({b, duration_s}), seed};
  std::mt19937_64 rng(seed);
  for (double start = 0; start < duration_s; start += period_s) {
    const double switch_at = std::min(start + low_duty * period_s, duration_s);
    const double end = std::min(start + period_s, duration_s);
    detail::poisson_segment(rng, low_per_hr / kSecondsPerHour, start, switch_at, duration_s,
                            tr.arrival_times_s);
    detail::poisson_segment(rng, high_per_hr / kSecondsPerHour, switch_at, end, duration_s,
                            tr.arrival_times_s);
  }
  return tr;
}

/// Instantaneous diurnal rate in requests/hour.
inline double diurnal_rate_per_hr(const Diurnal& d, double t_s) {
  const double phase = d.peak_first ? t_s + d.cycle_s / 2 : t_s;
  return d.floor_per_hr +
         (d.peak_per_hr - d.floor_per_hr) / 2 *
             (1 - std::cos(2 * std::numbers::pi * phase / d.cycle_s));
}

/// Probability that a candidate at time t survives thinning against the
/// constant envelope at the peak rate.
inline double thinning_acceptance(const Diurnal& d, double t_s) {
  return diurnal_rate_per_hr(d, t_s) / d.peak_per_hr;
}

inline ArrivalTrace gen_diurnal(const Diurnal& d, double duration_s, std::uint64_t seed) {
  detail::require(d.peak_per_hr > 0 && std::isfinite(d.peak_per_hr), "peak rate must be > 0");
  detail::require(d.cycle_s > 0 && std::isfinite(d.cycle_s), "cycle must be > 0");
  detail::require(d.floor_per_hr >= 0 && d.floor_per_hr <= d.peak_per_hr,
                  "floor rate must be in [0, peak]");
  detail::check_duration(duration_s);

  ArrivalTrace tr{{}, duration_s, label({d, duration_s}), seed};
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(d.peak_per_hr / kSecondsPerHour);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (double t = gap(rng); t < duration_s; t += gap(rng)) {
    if (u01(rng) < thinning_acceptance(d, t)) detail::push_arrival(tr.arrival_times_s, t, duration_s);
  }
  return tr;
}

inline ArrivalTrace gen_diurnal(double peak_per_hr, double cycle_s, double duration_s,
                                std::uint64_t seed) {
  return gen_diurnal(Diurnal{peak_per_hr, cycle_s, 0.0, false}, duration_s, seed);
}

inline ArrivalTrace generate(const TrafficSpec& spec, std::uint64_t seed) {
  return std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Steady>) {
          return gen_steady(v.rate_per_hr, spec.duration_s, seed);
        } else if constexpr (std::is_same_v<T, Bursty>) {
          return gen_bursty(v.low_per_hr, v.high_per_hr, v.period_s, v.low_duty, spec.duration_s,
                            seed);
        } else {
          return gen_diurnal(v, spec.duration_s, seed);
        }
      },
      spec.variant);
}

/// Expected number of arrivals, by exact integration of the rate function.
inline double expected_count(const TrafficSpec& spec) {
  const double T = spec.duration_s;
  return std::visit(
      [&](const auto& v) {
        using T_ = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T_, Steady>) {
          return v.rate_per_hr * T / kSecondsPerHour;
        } else if constexpr (std::is_same_v<T_, Bursty>) {
          double low_time = 0;
          for (double s = 0; s < T; s += v.period_s)
            low_time += std::min(s + v.low_duty * v.period_s, T) - s;
          return (v.low_per_hr * low_time + v.high_per_hr * (T - low_time)) / kSecondsPerHour;
        } else {
          // integral of floor + (peak-floor)/2 (1 - cos(2 pi (t+phi)/c)) over [0, T)
          const double phi = v.peak_first ? v.cycle_s / 2 : 0.0;
          const double w = 2 * std::numbers::pi / v.cycle_s;
          const double cos_int = (std::sin(w * (T + phi)) - std::sin(w * phi)) / w;
          const double amp = (v.peak_per_hr - v.floor_per_hr) / 2;
          return (v.floor_per_hr * T + amp * (T - cos_int)) / kSecondsPerHour;
        }
      },
      spec.variant);
}

// ---------------------------------------------------------------------------
// Trace files: `#`-prefixed header comments, then one arrival time (seconds,
// 6 decimals) per line. Recognized header keys: duration_s, spec, seed.

inline void save_trace(const ArrivalTrace& tr, std::ostream& out) {
  out << "# parktax arrival trace\n";
  out << "# spec: " << tr.spec_label << "\n";
  out << "# seed: " << tr.seed << "\n";
  out << "# duration_s: " << std::fixed << std::setprecision(6) << tr.duration_s << "\n";
  for (double t : tr.arrival_times_s) out << t << "\n";
}

inline void save_trace(const ArrivalTrace& tr, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write " + path.string());
  save_trace(tr, out);
}

inline ArrivalTrace load_trace(std::istream& in, const std::string& source = "<stream>") {
  ArrivalTrace tr;
  std::optional<double> duration;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) -> void {
    throw ParseError(source + ":" + std::to_string(lineno) + ": " + why, {lineno});
  };
  auto parse_double = [&](const std::string& s, double& out) {
    std::size_t pos = 0;
    try {
      out = std::stod(s, &pos);
    } catch (const std::exception&) {
      fail("not a number: '" + s + "'");
    }
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size() || !std::isfinite(out)) fail("not a number: '" + s + "'");
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      const auto body = line.substr(first + 1);
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      const auto key = trim(body.substr(0, colon));
      const auto value = trim(body.substr(colon + 1));
      if (key == "duration_s") {
        double d = 0;
        parse_double(value, d);
        if (d <= 0) fail("duration_s must be > 0");
        duration = d;
      } else if (key == "spec") {
        tr.spec_label = value;
      } else if (key == "seed") {
        try {
          tr.seed = std::stoull(value);
        } catch (const std::exception&) {
          fail("bad seed '" + value + "'");
        }
      }
      continue;
    }
    double t = 0;
    parse_double(line.substr(first), t);
    if (t < 0) fail("negative arrival time");
    if (!tr.arrival_times_s.empty() && t < tr.arrival_times_s.back())
      fail("arrival times must be non-decreasing");
    if (duration && t >= *duration) fail("arrival time beyond duration_s");
    tr.arrival_times_s.push_back(t);
  }
  if (duration) {
    tr.duration_s = *duration;
  } else {
    tr.duration_s = tr.empty() ? 0.0
                               : std::nextafter(tr.arrival_times_s.back(),
                                                std::numeric_limits<double>::infinity());
  }
  return tr;
}

inline ArrivalTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path.string());
  return load_trace(in, path.string());
}

}  // namespace parktax
