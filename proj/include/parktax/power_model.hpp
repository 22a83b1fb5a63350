// Copyright 2026 The parktax Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "parktax/error.hpp"

namespace parktax {

enum class MemoryTech { HBM3, HBM2e, GDDR6 };

NLOHMANN_JSON_SERIALIZE_ENUM(MemoryTech, {
                                             {MemoryTech::HBM3, "HBM3"},
                                             {MemoryTech::HBM2e, "HBM2e"},
                                             {MemoryTech::GDDR6, "GDDR6"},
                                         })

/// Idle power parameters of one GPU architecture.
///
/// Idle power is a step in context presence plus a (near-zero) linear VRAM
/// term: P = p_base + (p_ctx - p_base)*[ctx] + beta*V*[ctx].
struct GpuProfile {
  std::string name;
  MemoryTech memory_tech = MemoryTech::HBM3;
  double tdp_w = 0;
  double p_base_w = 0;  // bare idle, no context
  double p_ctx_w = 0;   // idle with context, no VRAM allocated
  double beta_w_per_gb = 0;
  double sm_clock_idle_mhz = 0;
  double sm_clock_ctx_mhz = 0;
  double max_vram_gb = 0;

  friend bool operator==(const GpuProfile&, const GpuProfile&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GpuProfile, name, memory_tech, tdp_w, p_base_w, p_ctx_w,
                                   beta_w_per_gb, sm_clock_idle_mhz, sm_clock_ctx_mhz,
                                   max_vram_gb)

struct LoadStage {
  double duration_s = 0;
  double power_w = 0;

  friend bool operator==(const LoadStage&, const LoadStage&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LoadStage, duration_s, power_w)

/// Power drawn while loading a model, as consecutive constant-power stages.
struct LoadProfile {
  std::vector<LoadStage> stages;
  std::string label;
  // Informational only; nothing in the energy math reads it.
  std::optional<double> vram_gb;

  static LoadProfile constant(double power_w, double duration_s, std::string label = "constant") {
    return LoadProfile{{{duration_s, power_w}}, std::move(label), std::nullopt};
  }

  double total_duration() const {
    return std::accumulate(stages.begin(), stages.end(), 0.0,
                           [](double acc, const LoadStage& s) { return acc + s.duration_s; });
  }

  friend bool operator==(const LoadProfile&, const LoadProfile&) = default;
};

inline void validate(const GpuProfile& p) {
  using detail::require;
  require(!p.name.empty(), "profile name must not be empty");
  require(p.p_base_w > 0, "profile " + p.name + ": p_base_w must be > 0");
  require(p.p_ctx_w > p.p_base_w, "profile " + p.name + ": p_ctx_w must exceed p_base_w");
  require(p.tdp_w > p.p_ctx_w, "profile " + p.name + ": tdp_w must exceed p_ctx_w");
  require(p.sm_clock_ctx_mhz > p.sm_clock_idle_mhz,
          "profile " + p.name + ": sm_clock_ctx_mhz must exceed sm_clock_idle_mhz");
  require(p.max_vram_gb > 0, "profile " + p.name + ": max_vram_gb must be > 0");
}

inline void validate(const LoadProfile& load) {
  detail::require(!load.stages.empty(), "load profile '" + load.label + "' has no stages");
  for (const auto& s : load.stages) {
    detail::require(s.duration_s > 0 && std::isfinite(s.duration_s),
                    "load profile '" + load.label + "': stage durations must be > 0");
    detail::require(s.power_w > 0 && std::isfinite(s.power_w),
                    "load profile '" + load.label + "': stage powers must be > 0");
  }
}

inline double idle_power(const GpuProfile& p, bool ctx, double vram_gb) {
  detail::require(vram_gb >= 0 && vram_gb <= p.max_vram_gb,
                  "vram_gb out of range [0, max_vram_gb] for " + p.name);
  detail::require(ctx || vram_gb == 0, "VRAM cannot be allocated without a context");
  if (!ctx) return p.p_base_w;
  return p.p_ctx_w + p.beta_w_per_gb * vram_gb;
}

inline double parking_tax(const GpuProfile& p) { return p.p_ctx_w - p.p_base_w; }

inline double load_energy(const LoadProfile& load) {
  validate(load);
  double e = 0;
  for (const auto& s : load.stages) e += s.duration_s * s.power_w;
  return e;
}

inline LoadProfile concat(const LoadProfile& a, const LoadProfile& b) {
  LoadProfile out = a;
  out.stages.insert(out.stages.end(), b.stages.begin(), b.stages.end());
  out.label = a.label + "+" + b.label;
  out.vram_gb.reset();
  return out;
}

/// The three measured architectures.
inline std::vector<GpuProfile> builtin_profiles() {
  return {
      {"H100", MemoryTech::HBM3, 700, 71.8, 121.7, -0.002, 345, 1980, 80},
      {"A100", MemoryTech::HBM2e, 300, 53.7, 80.0, -0.001, 210, 1410, 80},
      {"L40S", MemoryTech::GDDR6, 350, 35.6, 102.1, -0.002, 210, 2520, 48},
  };
}

/// Loader profiles: four constant-power loaders plus the staged 1 Hz capture
/// of a 7B model loading on H100 (CPU deserialization, GPU burst, settle).
inline std::vector<LoadProfile> builtin_loads() {
  return {
      LoadProfile::constant(124, 30, "qwen-7b-measured"),
      LoadProfile::constant(300, 45, "pytorch-70b"),
      LoadProfile::constant(300, 8, "serverlessllm-70b"),
      LoadProfile::constant(200, 5, "runai-streamer-8b"),
      LoadProfile{{{22, 70.8}, {3, 124.1}, {4.7, 121}}, "qwen-7b-staged", 14.9},
  };
}

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what(), {});
  }
}

}  // namespace detail

inline std::optional<GpuProfile> find_builtin_profile(std::string_view name) {
  for (auto& p : builtin_profiles())
    if (detail::lower(p.name) == detail::lower(name)) return p;
  return std::nullopt;
}

inline std::optional<LoadProfile> find_builtin_load(std::string_view label) {
  for (auto& l : builtin_loads())
    if (detail::lower(l.label) == detail::lower(label)) return l;
  return std::nullopt;
}

inline void to_json(nlohmann::json& j, const LoadProfile& l) {
  j = nlohmann::json{{"label", l.label}, {"stages", l.stages}};
  if (l.vram_gb) j["vram_gb"] = *l.vram_gb;
}

inline void from_json(const nlohmann::json& j, LoadProfile& l) {
  j.at("label").get_to(l.label);
  j.at("stages").get_to(l.stages);
  if (j.contains("vram_gb")) l.vram_gb = j.at("vram_gb").get<double>();
}

/// Built-in name first (case-insensitive), then a JSON file holding one profile.
inline GpuProfile resolve_profile(const std::string& name_or_path) {
  if (auto p = find_builtin_profile(name_or_path)) return *p;
  if (!std::filesystem::exists(name_or_path))
    throw DomainError("unknown profile '" + name_or_path + "' (not a built-in, not a file)");
  GpuProfile p;
  try {
    p = detail::read_json_file(name_or_path).get<GpuProfile>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(name_or_path + ": " + e.what(), {});
  }
  validate(p);
  return p;
}

inline LoadProfile resolve_load(const std::string& label_or_path) {
  if (auto l = find_builtin_load(label_or_path)) return *l;
  if (!std::filesystem::exists(label_or_path))
    throw DomainError("unknown load profile '" + label_or_path + "' (not a built-in, not a file)");
  LoadProfile l;
  try {
    l = detail::read_json_file(label_or_path).get<LoadProfile>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(label_or_path + ": " + e.what(), {});
  }
  validate(l);
  return l;
}

}  // namespace parktax
