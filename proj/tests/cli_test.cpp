// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "parktax/cli.hpp"

namespace parktax::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("parktax_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST(ParseHelpers, DurationsAndRates) {
  EXPECT_EQ(parse_duration("24h"), 86400);
  EXPECT_EQ(parse_duration("90m"), 5400);
  EXPECT_EQ(parse_duration("300s"), 300);
  EXPECT_EQ(parse_duration("45"), 45);
  EXPECT_THROW(parse_duration("h"), UsageError);
  EXPECT_THROW(parse_duration("abc"), UsageError);
  EXPECT_EQ(parse_rate_per_hr("5/hr"), 5);
  EXPECT_EQ(parse_rate_per_hr("5"), 5);
  EXPECT_DOUBLE_EQ(parse_rate_per_hr("0.001/s"), 3.6);
  EXPECT_THROW(parse_rate_per_hr("fast"), UsageError);
}

TEST(ParseHelpers, TrafficSpecs) {
  const auto s = parse_traffic_spec("steady:5/hr", 3600);
  ASSERT_TRUE(s);
  EXPECT_EQ(std::get<Steady>(s->variant).rate_per_hr, 5);
  const auto b = parse_traffic_spec("bursty:2,60,1h,0.5", 86400);
  EXPECT_EQ(std::get<Bursty>(b->variant).period_s, 3600);
  EXPECT_EQ(std::get<Bursty>(b->variant).low_duty, 0.5);
  const auto d = parse_traffic_spec("diurnal:30,24h,0,peak", 86400);
  EXPECT_TRUE(std::get<Diurnal>(d->variant).peak_first);
  EXPECT_FALSE(parse_traffic_spec("trace.csv", 86400));
  EXPECT_THROW(parse_traffic_spec("steady:", 86400), UsageError);
  EXPECT_THROW(parse_traffic_spec("bursty:1,2,3", 86400), UsageError);
}

TEST(Run, BreakevenPrintsPublishedLine) {
  const auto r = call({"breakeven", "--profile", "h100", "--load-power", "300", "--load-time", "45"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "T* = 270.5 s (4.5 min), λ* = 13.3/hr");
}

TEST(Run, ImpactPrintsRoundedGwh) {
  const auto r = call({"impact", "--fleet", "3.76e6", "--utilization", "0.65", "--park-power", "40"});
  EXPECT_EQ(r.code, 0);
  const auto pos = r.out.find(" GWh/yr");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(r.out.substr(0, pos)), 462, 1);
  EXPECT_NE(r.out.find("kT CO2"), std::string::npos);
}

TEST(Run, NoArgsIsUsageError) {
  const auto r = call({});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("breakeven"), std::string::npos);
}

TEST(Run, UnknownFlagSuggestsClosest) {
  const auto r = call({"breakeven", "--profle", "h100"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("did you mean --profile"), std::string::npos) << r.err;
}

TEST(Run, UnknownSubcommandAndTable) {
  EXPECT_EQ(call({"frobnicate"}).code, 2);
  EXPECT_EQ(call({"reproduce", "--table", "table9"}).code, 2);
  EXPECT_EQ(call({"simulate", "--duration", "soon"}).code, 2);
}

TEST(Run, DomainErrorExitsOne) {
  EXPECT_EQ(call({"breakeven", "--load-power", "-3", "--load-time", "45"}).code, 1);
  EXPECT_EQ(call({"simulate", "--policy", "ttl:-1"}).code, 1);
  EXPECT_EQ(call({"breakeven", "--profile", "no-such-gpu"}).code, 1);
}

TEST(Run, HelpAndVersion) {
  EXPECT_EQ(call({"--help"}).code, 0);
  const auto v = call({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(kVersion), std::string::npos);
}

TEST_F(CliTest, SimulateWritesOutputsAndManifest) {
  const auto r = call({"simulate", "--policy", "breakeven", "--traffic", "steady:5", "--seed", "3",
                       "--out", path("sim.json"), "--emit-timeline", path("timeline.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("sim.json")));
  EXPECT_EQ(j["schema_version"], kSchemaVersion);
  EXPECT_EQ(j["policy"], "breakeven");
  EXPECT_GT(j["cold_starts"].get<int>(), 1);
  const auto timeline = slurp(path("timeline.csv"));
  EXPECT_EQ(timeline.rfind("t_start,t_end,state,power_w\n", 0), 0u);
  EXPECT_NE(timeline.find(",loading,300.000000"), std::string::npos);
  const auto m = nlohmann::json::parse(slurp(path("run_manifest.json")));
  EXPECT_EQ(m["subcommand"], "simulate");
  EXPECT_EQ(m["outputs"].size(), 2u);
  EXPECT_EQ(m["config"]["seed"], 3);
}

TEST_F(CliTest, ReplayReproducesOutputsByteForByte) {
  ASSERT_EQ(call({"simulate", "--policy", "ttl:600", "--traffic", "bursty:2,60", "--seed", "8",
                  "--out", path("sim.json"), "--emit-timeline", path("timeline.csv")})
                .code,
            0);
  const auto sim = slurp(path("sim.json"));
  const auto timeline = slurp(path("timeline.csv"));
  fs::remove(path("sim.json"));
  fs::remove(path("timeline.csv"));
  ASSERT_EQ(call({"--replay", path("run_manifest.json")}).code, 0);
  EXPECT_EQ(slurp(path("sim.json")), sim);
  EXPECT_EQ(slurp(path("timeline.csv")), timeline);
}

TEST_F(CliTest, GenTrafficThenSimulateFromFile) {
  ASSERT_EQ(call({"gen-traffic", "--pattern", "diurnal", "--seed", "5", "--out", path("t.csv")}).code, 0);
  const auto from_file = call({"simulate", "--traffic", path("t.csv"), "--out", path("a.json")});
  const auto from_spec = call({"simulate", "--traffic", "diurnal:30,24h,2", "--seed", "5", "--out",
                               path("b.json")});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  ASSERT_EQ(from_spec.code, 0) << from_spec.err;
  const auto a = nlohmann::json::parse(slurp(path("a.json")));
  const auto b = nlohmann::json::parse(slurp(path("b.json")));
  EXPECT_EQ(a["energy_wh"], b["energy_wh"]);
  EXPECT_EQ(a["cold_starts"], b["cold_starts"]);
}

TEST_F(CliTest, MissingTraceFileIsUsageError) {
  EXPECT_EQ(call({"simulate", "--traffic", path("nope.csv")}).code, 2);
}

TEST_F(CliTest, CompareAcrossSeeds) {
  const auto r = call({"compare", "--policies", "always-on;ttl:300;breakeven", "--seeds", "3",
                       "--out", path("cmp.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("cmp.json")));
  ASSERT_EQ(j["policies"].size(), 3u);
  EXPECT_EQ(j["seeds"], (nlohmann::json{1, 2, 3}));
  EXPECT_EQ(j["policies"][0]["mean_savings_pct"], 0.0);
  EXPECT_EQ(j["policies"][2]["runs"].size(), 3u);
  EXPECT_EQ(call({"compare", "--policies", "ttl:300"}).code, 1);
}

TEST_F(CliTest, TelemetryPipeline) {
  write_json(path("schedule.json"), dose_schedule(64, 9));
  ASSERT_EQ(call({"gen-telemetry", "--profile", "h100", "--schedule", path("schedule.json"),
                  "--noise", "0.17", "--seed", "2", "--out", path("tel.csv")})
                .code,
            0);
  const auto r = call({"analyze", "--input", path("tel.csv"), "--out", path("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("(equivalent)"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(path("report.json")));
  EXPECT_EQ(j["retention"]["retention_fraction"], 1.0);
  EXPECT_TRUE(j["per_gpu"][0]["equivalence"]["equivalent"].get<bool>());
}

TEST_F(CliTest, AnalyzeMalformedFileIsDomainError) {
  write_text(path("bad.csv"), std::string(kTelemetryHeader) + "\n0,gpu0,x,345,0,0\n");
  const auto r = call({"analyze", "--input", path("bad.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("malformed rows 2"), std::string::npos);
}

TEST_F(CliTest, ReproduceTable4) {
  const auto r = call({"reproduce", "--table", "table4", "--out", path("repro")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("repro/table4_comparison.json")));
  EXPECT_TRUE(j["all_pass"].get<bool>());
  EXPECT_TRUE(fs::exists(path("repro/table4.csv")));
  EXPECT_TRUE(fs::exists(path("repro/run_manifest.json")));
}

TEST_F(CliTest, ReproduceTable3) {
  ASSERT_EQ(call({"reproduce", "--table", "table3", "--out", path("repro")}).code, 0);
  const auto j = nlohmann::json::parse(slurp(path("repro/table3_comparison.json")));
  EXPECT_TRUE(j["all_pass"].get<bool>());
  EXPECT_GE(j["checks"].size(), 4u);
}

TEST_F(CliTest, ImpactSensitivityFiles) {
  write_json(path("low.json"), FleetScenario{2e6, 0.8, 26.3});
  write_json(path("base.json"), FleetScenario{3.76e6, 0.65, 40});
  write_json(path("high.json"), FleetScenario{6e6, 0.5, 66.4});
  const auto r = call({"impact", "--sensitivity", path("low.json"), path("base.json"),
                       path("high.json"), "--out", path("impact.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("low: 92 GWh/yr"), std::string::npos);
  EXPECT_NE(r.out.find("high: 1745 GWh/yr"), std::string::npos);
  const auto bad = call({"impact", "--sensitivity", path("high.json"), path("base.json"),
                         path("low.json")});
  EXPECT_EQ(bad.code, 1);
}

}  // namespace
}  // namespace parktax::cli
