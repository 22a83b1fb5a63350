// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "parktax/traffic.hpp"

namespace parktax {
namespace {

constexpr double kDay = 86400;

void expect_well_formed(const ArrivalTrace& tr) {
  EXPECT_TRUE(std::is_sorted(tr.arrival_times_s.begin(), tr.arrival_times_s.end()));
  for (double t : tr.arrival_times_s) {
    EXPECT_GE(t, 0);
    EXPECT_LT(t, tr.duration_s);
  }
}

struct Moments {
  double mean = 0, var = 0;
};

template <class Gen>
Moments count_moments(int n_seeds, Gen gen) {
  std::vector<double> c;
  for (int s = 0; s < n_seeds; ++s) c.push_back(static_cast<double>(gen(s).size()));
  Moments m;
  for (double x : c) m.mean += x;
  m.mean /= n_seeds;
  for (double x : c) m.var += (x - m.mean) * (x - m.mean);
  m.var /= n_seeds - 1;
  return m;
}

TEST(Steady, ZeroRateIsEmpty) {
  const auto tr = gen_steady(0, kDay, 123);
  EXPECT_TRUE(tr.empty());
  EXPECT_EQ(tr.duration_s, kDay);
}

TEST(Steady, RejectsBadArguments) {
  EXPECT_THROW(gen_steady(-1, kDay, 1), DomainError);
  EXPECT_THROW(gen_steady(5, 0, 1), DomainError);
}

TEST(Steady, PoissonCountBand) {
  // Count ~ Poisson(120): 120 +/- 3 sqrt(120) holds for ~99.7% of seeds.
  const double lo = 120 - 3 * std::sqrt(120.0), hi = 120 + 3 * std::sqrt(120.0);
  int inside = 0;
  for (int s = 0; s < 1000; ++s) {
    const auto tr = gen_steady(5, kDay, static_cast<std::uint64_t>(s));
    const double n = static_cast<double>(tr.size());
    inside += n >= lo && n <= hi;
    if (s < 50) expect_well_formed(tr);
  }
  EXPECT_GE(inside, 990);
}

TEST(Steady, Deterministic) {
  EXPECT_EQ(gen_steady(5, kDay, 42), gen_steady(5, kDay, 42));
  EXPECT_NE(gen_steady(5, kDay, 42).arrival_times_s, gen_steady(5, kDay, 43).arrival_times_s);
}

TEST(Bursty, ExpectedCountIntegral) {
  const TrafficSpec spec{Bursty{2, 60, 7200, 0.7}, kDay};
  EXPECT_NEAR(expected_count(spec), 24 * (0.7 * 2 + 0.3 * 60), 1e-9);
  EXPECT_NEAR(expected_count({Bursty{2, 60, 7200, 0.5}, kDay}), 744, 1e-9);

  const auto m = count_moments(400, [&](int s) { return generate(spec, static_cast<std::uint64_t>(s)); });
  // Mean of 400 Poisson(465.6) counts: standard error sqrt(465.6/400) ~ 1.08.
  EXPECT_NEAR(m.mean, 465.6, 4 * std::sqrt(465.6 / 400));
}

TEST(Bursty, LowThenHighWithinPeriod) {
  const auto tr = gen_bursty(0, 60, 7200, 0.7, kDay, 5);
  ASSERT_FALSE(tr.empty());
  for (double t : tr.arrival_times_s) EXPECT_GE(std::fmod(t, 7200.0), 0.7 * 7200 - 1e-6);
  expect_well_formed(tr);
}

TEST(Bursty, DegenerateAlternationMatchesSteady) {
  const auto b = count_moments(400, [](int s) {
    return gen_bursty(10, 10, 3000, 0.4, kDay, static_cast<std::uint64_t>(s));
  });
  const auto st = count_moments(400, [](int s) {
    return gen_steady(10, kDay, static_cast<std::uint64_t>(s) + 100000);
  });
  const double se = std::sqrt(240.0 / 400 * 2);
  EXPECT_NEAR(b.mean, st.mean, 4 * se);
  EXPECT_NEAR(b.var / st.var, 1.0, 0.3);
}

TEST(Bursty, RejectsBadDuty) {
  EXPECT_THROW(gen_bursty(2, 60, 7200, 0, kDay, 1), DomainError);
  EXPECT_THROW(gen_bursty(2, 60, 7200, 1, kDay, 1), DomainError);
  EXPECT_THROW(gen_bursty(2, 60, 0, 0.5, kDay, 1), DomainError);
  EXPECT_THROW(gen_bursty(-2, 60, 7200, 0.5, kDay, 1), DomainError);
}

TEST(Diurnal, RateEndpoints) {
  const Diurnal d{30, kDay, 0, false};
  EXPECT_DOUBLE_EQ(diurnal_rate_per_hr(d, 0), 0);
  EXPECT_NEAR(diurnal_rate_per_hr(d, kDay / 2), 30, 1e-12);
  const Diurnal floored{30, kDay, 2, false};
  EXPECT_DOUBLE_EQ(diurnal_rate_per_hr(floored, 0), 2);
  const Diurnal peak_first{30, kDay, 0, true};
  EXPECT_NEAR(diurnal_rate_per_hr(peak_first, 0), 30, 1e-12);
}

TEST(Diurnal, ExpectedCountIntegral) {
  EXPECT_NEAR(expected_count({Diurnal{30, kDay, 0, false}, kDay}), 360, 1e-9);
  EXPECT_NEAR(expected_count({Diurnal{30, kDay, 0, true}, kDay}), 360, 1e-9);
  EXPECT_NEAR(expected_count({Diurnal{30, kDay, 2, false}, kDay}), 24 * 16, 1e-9);
  const auto m = count_moments(300, [](int s) { return gen_diurnal(30, kDay, kDay, static_cast<std::uint64_t>(s)); });
  EXPECT_NEAR(m.mean, 360, 4 * std::sqrt(360.0 / 300));
}

TEST(Diurnal, ThinningAcceptanceIsRateOverPeak) {
  const Diurnal d{30, kDay, 2, false};
  for (double t = 0; t < kDay; t += 997)
    EXPECT_DOUBLE_EQ(thinning_acceptance(d, t), diurnal_rate_per_hr(d, t) / 30);
}

TEST(Diurnal, BinnedRateFollowsCurve) {
  // Pool 200 seeds into hourly bins; each pooled bin count is Poisson with
  // mean 200 * integral of the rate over the bin.
  const Diurnal d{30, kDay, 0, false};
  constexpr int kSeeds = 200, kBins = 24;
  std::vector<double> counts(kBins, 0);
  for (int s = 0; s < kSeeds; ++s)
    for (double t : gen_diurnal(d, kDay, static_cast<std::uint64_t>(s)).arrival_times_s)
      counts[static_cast<std::size_t>(t / 3600)] += 1;
  const double w = 2 * std::numbers::pi / kDay;
  for (int b = 0; b < kBins; ++b) {
    const double t0 = b * 3600.0, t1 = t0 + 3600;
    const double integral = 15 * ((t1 - t0) - (std::sin(w * t1) - std::sin(w * t0)) / w) / 3600;
    const double expected = kSeeds * integral;
    EXPECT_NEAR(counts[static_cast<std::size_t>(b)], expected, 3 * std::sqrt(expected) + 1e-9)
        << "hour " << b;
  }
}

TEST(Diurnal, RejectsBadArguments) {
  EXPECT_THROW(gen_diurnal(0, kDay, kDay, 1), DomainError);
  EXPECT_THROW(gen_diurnal(30, 0, kDay, 1), DomainError);
  EXPECT_THROW(gen_diurnal(Diurnal{30, kDay, 40, false}, kDay, 1), DomainError);
}

TEST(Superposition, CountsMatchCombinedRate) {
  const auto sum = count_moments(500, [](int s) {
    const auto a = gen_steady(3, kDay, static_cast<std::uint64_t>(s));
    const auto b = gen_steady(7, kDay, static_cast<std::uint64_t>(s) + 777777);
    ArrivalTrace merged = a;
    merged.arrival_times_s.insert(merged.arrival_times_s.end(), b.arrival_times_s.begin(),
                                  b.arrival_times_s.end());
    return merged;
  });
  const auto joint = count_moments(500, [](int s) { return gen_steady(10, kDay, static_cast<std::uint64_t>(s) + 3333333); });
  const double se = std::sqrt(240.0 / 500 * 2);
  EXPECT_NEAR(sum.mean, joint.mean, 4 * se);
  EXPECT_NEAR(sum.var / joint.var, 1.0, 0.3);
}

TEST(AllPatterns, WellFormedAndDeterministic) {
  const std::vector<TrafficSpec> specs{{Steady{50}, 7200},
                                       {Bursty{2, 60, 1800, 0.3}, 10000},
                                       {Diurnal{30, 3600, 1, true}, 5000}};
  for (const auto& spec : specs)
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto tr = generate(spec, s);
      expect_well_formed(tr);
      EXPECT_EQ(tr, generate(spec, s));
      EXPECT_EQ(tr.spec_label, label(spec));
    }
}

TEST(TraceFile, RoundTripIsExact) {
  for (const auto& spec : {TrafficSpec{Steady{60}, kDay}, TrafficSpec{Bursty{}, kDay},
                           TrafficSpec{Diurnal{}, kDay}}) {
    const auto tr = generate(spec, 9);
    std::stringstream ss;
    save_trace(tr, ss);
    EXPECT_EQ(load_trace(ss), tr);
  }
}

TEST(TraceFile, EmptyTraceRoundTrips) {
  const auto tr = gen_steady(0, 3600, 4);
  std::stringstream ss;
  save_trace(tr, ss);
  const auto back = load_trace(ss);
  EXPECT_TRUE(back.empty());
  EXPECT_EQ(back, tr);
}

TEST(TraceFile, HandWrittenFixture) {
  const auto tr = load_trace(std::filesystem::path(PARKTAX_TEST_DATA_DIR) / "traces" / "three_arrivals.csv");
  EXPECT_EQ(tr.arrival_times_s, (std::vector<double>{12.5, 3600.0, 3600.000001}));
  EXPECT_EQ(tr.duration_s, 7200);
  EXPECT_EQ(tr.spec_label, "hand-written");
}

TEST(TraceFile, ParseErrorsCarryLineNumbers) {
  auto expect_line = [](const std::string& text, std::size_t line) {
    std::stringstream ss(text);
    try {
      load_trace(ss);
      FAIL() << "expected ParseError for:\n" << text;
    } catch (const ParseError& e) {
      ASSERT_EQ(e.lines().size(), 1u);
      EXPECT_EQ(e.lines()[0], line);
      EXPECT_NE(std::string(e.what()).find(":" + std::to_string(line) + ":"), std::string::npos);
    }
  };
  expect_line("# duration_s: 100\n1.0\nabc\n", 3);
  expect_line("1.0\n0.5\n", 2);
  expect_line("# duration_s: 100\n\n150.0\n", 3);
  expect_line("-1.0\n", 1);
  expect_line("1.0 2.0\n", 1);
}

TEST(TraceFile, MissingDurationIsInferred) {
  std::stringstream ss("5.0\n7.25\n");
  const auto tr = load_trace(ss);
  EXPECT_EQ(tr.size(), 2u);
  EXPECT_GT(tr.duration_s, 7.25);
  EXPECT_LT(tr.duration_s, 7.2500001);
}

}  // namespace
}  // namespace parktax
