#pragma once

#include <filesystem>
#include <string>

#include "envforge/config.hpp"
#include "envforge/error.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return ENVFORGE_SOURCE_DIR; }
inline std::filesystem::path config_dir() { return source_dir() / "configs"; }
inline std::filesystem::path data_dir() { return source_dir() / "tests" / "data"; }

/// A fresh directory under the build tree's scratch area.
inline std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::path(ENVFORGE_SCRATCH_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Validates environment YAML text; agent files resolve against `base`.
inline envforge::EnvironmentConfig env_from_text(const std::string& text,
                                                 const std::filesystem::path& base = config_dir() / "docking") {
  auto v = envforge::validate_environment(envforge::parse_config(text, base, "<test>"));
  if (!v.report.ok()) throw envforge::Error(envforge::ErrorCode::InvalidValue, v.report.to_string());
  return *v.config;
}

inline envforge::EnvironmentConfig docking_env() { return envforge::load_environment(config_dir() / "docking" / "env.yml"); }

/// Docking environment around configs/docking/agent.yml with a fixed start.
inline std::string docking_text(double x0, double v0, int horizon = 2000, const std::string& extra = "") {
  return "simulator:\n  name: Docking1dSimulator\n  config: {frame_rate: 1.0, mass: 12.0}\n"
         "platforms:\n  - name: deputy\n    init:\n      x0: {value: " +
         std::to_string(x0) + ", unit: meter}\n      xdot0: {value: " + std::to_string(v0) +
         ", unit: meter_per_second}\n"
         "agents:\n  - agent.yml\nhorizon: " +
         std::to_string(horizon) + "\n" + extra;
}

}  // namespace testing
