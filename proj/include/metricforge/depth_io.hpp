#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "metricforge/geometry.hpp"
#include "metricforge/grid.hpp"
#include "metricforge/prompting.hpp"

namespace metricforge {

// Supported depth-map interchange formats, selected by file extension:
//   .png  16-bit grayscale, millimeters, 0 = invalid
//   .pfm  32-bit float grayscale, meters, little-endian rows bottom-up,
//         non-positive or non-finite = invalid
//   .raw  little-endian float32 meters plus a "<path>.json" sidecar
//         {schema, width, height, mask_file} and a raw 0/1 byte mask file
//
// PNG quantizes to 1 mm and clamps valid depths to [0.001, 65.535] m so the
// mask round-trips exactly.

DepthGrid read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthGrid& grid);

DepthGrid read_depth_png16(const std::filesystem::path& path);
void write_depth_png16(const std::filesystem::path& path, const DepthGrid& grid);

DepthGrid read_depth_pfm(const std::filesystem::path& path);
void write_depth_pfm(const std::filesystem::path& path, const DepthGrid& grid);

DepthGrid read_depth_raw(const std::filesystem::path& path);
void write_depth_raw(const std::filesystem::path& path, const DepthGrid& grid);

// Binary masks (prompt locations) as 16-bit grayscale PNG holding raw 0/1
// values, no millimeter scaling.
void write_mask_png16(const std::filesystem::path& path, int width, int height,
                      const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> read_mask_png16(const std::filesystem::path& path, int& width,
                                          int& height);

// Prompt interchange: UTF-8 text, one "x y d" record per line, d in meters
// printed with full round-trip precision.
SparsePrompt read_prompt(const std::filesystem::path& path);
void write_prompt(const std::filesystem::path& path, const SparsePrompt& prompt);

// Point clouds: text, one "x y z" record per line, meters.
PointCloud read_cloud_xyz(const std::filesystem::path& path);
void write_cloud_xyz(const std::filesystem::path& path, const PointCloud& cloud);

}  // namespace metricforge
