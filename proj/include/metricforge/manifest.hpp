#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "metricforge/geometry.hpp"
#include "metricforge/losses.hpp"

namespace metricforge {

// One dataset sample. Optional inputs stay empty when absent; paths are
// resolved against the manifest's directory at load time and must exist.
struct SampleRecord {
  std::string id;
  std::filesystem::path image;       // optional, carried through only
  std::filesystem::path gt_depth;
  std::filesystem::path pred_depth;  // optional
  std::filesystem::path prior_depth; // optional
  std::filesystem::path prompt;      // optional
  std::filesystem::path cloud;       // optional, for projection
  CameraIntrinsics intrinsics;
  std::optional<RigidTransform> pose;
};

struct Manifest {
  int schema_version = 1;
  std::vector<SampleRecord> samples;
};

// Parses and validates a manifest. Throws ManifestParse on malformed JSON,
// bad intrinsics/pose, or referenced files that do not resolve.
Manifest load_manifest(const std::filesystem::path& path);

// Resolved tool configuration: loss hyperparameters plus the knobs of the
// individual commands. Defaults follow the published protocol.
struct Config {
  LossConfig loss;
  std::vector<double> boundary_thresholds{5.0, 10.0, 15.0, 20.0, 25.0};
  // Prompt sampling: fixed count when set, otherwise a uniform draw from
  // [band_min, band_max] per image.
  std::optional<std::size_t> prompt_count;
  std::size_t prompt_band_min = 2000;
  std::size_t prompt_band_max = 40000;
  int pdsa_k = 4;
  double gmdr_floor = 1e-3;
  int calib_max_iters = 100;
  double calib_tol = 1e-10;
  bool loss_synthetic = true;  // teacher SSI term on/off
  // Gradcheck command knobs.
  int gradcheck_width = 32;
  int gradcheck_height = 32;
  int gradcheck_seeds = 5;
  std::string depth_format = "pfm";  // output format of project/prepare
};

}  // namespace metricforge
