#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "metricforge/manifest.hpp"

namespace metricforge {

inline constexpr const char* kToolName = "metricforge";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

// Exit codes: 0 full success, 2 partial per-sample failure (non-strict),
// 1 fatal error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

struct RunOptions {
  std::string command;  // project | sample-prompt | prepare | loss |
                        // evaluate | boundary | calib | gradcheck
  std::filesystem::path manifest_path;  // optional for gradcheck
  Config config;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool strict = false;
  bool fixed_clock = false;  // zero out wall-clock fields for byte-stable reports
  std::filesystem::path out_dir = ".";
};

struct RunResult {
  int exit_code = kExitFatal;
  std::string report_json;  // serialized report, also written to out_dir/report.json
};

// Runs one command over every manifest sample, writes per-sample artifacts
// and the JSON report under out_dir, and returns the report. Per-sample
// failures are recorded and do not abort the batch unless strict is set.
// Deterministic for fixed (manifest, config, seed), independent of jobs.
RunResult run_manifest(const RunOptions& options);

// Parses a JSON config file into Config on top of defaults. Throws
// InvalidArgument on unknown keys or invalid values.
Config load_config(const std::filesystem::path& path);
Config config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const Config& config);

}  // namespace metricforge
