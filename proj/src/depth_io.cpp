#include "metricforge/depth_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "metricforge/errors.hpp"

namespace metricforge {

namespace {

std::string path_str(const std::filesystem::path& p) { return p.string(); }

[[noreturn]] void fail_read(const std::filesystem::path& p, const std::string& why) {
  raise(ErrorCode::FormatError, path_str(p) + ": " + why);
}

[[noreturn]] void fail_write(const std::filesystem::path& p, const std::string& why) {
  raise(ErrorCode::WriteFailure, path_str(p) + ": " + why);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// 16-bit grayscale PNG, millimeters, 0 = invalid

DepthGrid read_depth_png16(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path_str(path).c_str(), "rb"));
  if (!f) fail_read(path, "cannot open");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail_read(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail_read(path, "png_create_info_struct failed");
  }
  std::vector<std::uint16_t> rowbuf;
  DepthGrid grid;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail_read(path, "libpng error");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail_read(path, "expected 16-bit grayscale");
  }
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);

  grid = DepthGrid(w, h);
  rowbuf.resize(static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, reinterpret_cast<png_bytep>(rowbuf.data()), nullptr);
    for (int x = 0; x < w; ++x) {
      const std::uint16_t mm = rowbuf[x];
      if (mm != 0) grid.set(x, y, mm / 1000.0);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return grid;
}

void write_depth_png16(const std::filesystem::path& path, const DepthGrid& grid) {
  grid.validate();
  FilePtr f(std::fopen(path_str(path).c_str(), "wb"));
  if (!f) fail_write(path, "cannot open");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail_write(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail_write(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail_write(path, "libpng error");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, grid.width, grid.height, 16, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);

  std::vector<std::uint16_t> rowbuf(static_cast<std::size_t>(grid.width));
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t i = grid.index(x, y);
      if (grid.mask[i]) {
        // Quantize to millimeters, clamped so valid pixels stay nonzero.
        const double mm = std::round(grid.depth[i] * 1000.0);
        rowbuf[x] = static_cast<std::uint16_t>(std::clamp(mm, 1.0, 65535.0));
      } else {
        rowbuf[x] = 0;
      }
    }
    png_write_row(png, reinterpret_cast<png_bytep>(rowbuf.data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_mask_png16(const std::filesystem::path& path, int width, int height,
                      const std::vector<std::uint8_t>& mask) {
  if (width <= 0 || height <= 0 ||
      mask.size() != static_cast<std::size_t>(width) * height) {
    raise(ErrorCode::DimensionMismatch, "mask size does not match dimensions");
  }
  FilePtr f(std::fopen(path_str(path).c_str(), "wb"));
  if (!f) fail_write(path, "cannot open");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail_write(path, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail_write(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail_write(path, "libpng error");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);

  std::vector<std::uint16_t> rowbuf(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      rowbuf[x] = mask[static_cast<std::size_t>(y) * width + x] ? 1 : 0;
    }
    png_write_row(png, reinterpret_cast<png_bytep>(rowbuf.data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_mask_png16(const std::filesystem::path& path, int& width,
                                          int& height) {
  FilePtr f(std::fopen(path_str(path).c_str(), "rb"));
  if (!f) fail_read(path, "cannot open");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail_read(path, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail_read(path, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail_read(path, "libpng error");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  if (png_get_bit_depth(png, info) != 16 ||
      png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail_read(path, "expected 16-bit grayscale");
  }
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  if constexpr (std::endian::native == std::endian::little) png_set_swap(png);

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  std::vector<std::uint16_t> rowbuf(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    png_read_row(png, reinterpret_cast<png_bytep>(rowbuf.data()), nullptr);
    for (int x = 0; x < width; ++x) {
      mask[static_cast<std::size_t>(y) * width + x] = rowbuf[x] ? 1 : 0;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return mask;
}

// ---------------------------------------------------------------------------
// PFM, grayscale float32, bottom-up rows

DepthGrid read_depth_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_read(path, "cannot open");

  std::string magic;
  in >> magic;
  if (magic != "Pf") fail_read(path, "expected grayscale PFM magic 'Pf'");
  int w = 0, h = 0;
  double scale = 0.0;
  in >> w >> h >> scale;
  if (!in || w <= 0 || h <= 0 || scale == 0.0) fail_read(path, "malformed PFM header");
  in.get();  // single whitespace byte after the scale line

  const bool little_endian = scale < 0.0;
  std::vector<float> data(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * 4));
  if (!in) fail_read(path, "truncated pixel data");

  if (little_endian != (std::endian::native == std::endian::little)) {
    for (float& v : data) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      u = ((u & 0xff000000u) >> 24) | ((u & 0x00ff0000u) >> 8) | ((u & 0x0000ff00u) << 8) |
          ((u & 0x000000ffu) << 24);
      std::memcpy(&v, &u, 4);
    }
  }

  DepthGrid grid(w, h);
  for (int y = 0; y < h; ++y) {
    const int src_row = h - 1 - y;  // PFM stores rows bottom-up
    for (int x = 0; x < w; ++x) {
      const float v = data[static_cast<std::size_t>(src_row) * w + x];
      if (std::isfinite(v) && v > 0.0f) grid.set(x, y, static_cast<double>(v));
    }
  }
  return grid;
}

void write_depth_pfm(const std::filesystem::path& path, const DepthGrid& grid) {
  grid.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_write(path, "cannot open");

  out << "Pf\n" << grid.width << " " << grid.height << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(grid.width));
  const float invalid = std::numeric_limits<float>::infinity();
  for (int y = grid.height - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t i = grid.index(x, y);
      row[x] = grid.mask[i] ? static_cast<float>(grid.depth[i]) : invalid;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) fail_write(path, "short write");
}

// ---------------------------------------------------------------------------
// raw float32 + JSON sidecar + mask file

namespace {

constexpr const char* kRawSchema = "metricforge-raw-depth/1";

std::filesystem::path sidecar_path(const std::filesystem::path& p) {
  std::filesystem::path s = p;
  s += ".json";
  return s;
}

}  // namespace

DepthGrid read_depth_raw(const std::filesystem::path& path) {
  const std::filesystem::path side = sidecar_path(path);
  std::ifstream sin(side);
  if (!sin) fail_read(side, "cannot open sidecar");
  nlohmann::json j;
  try {
    sin >> j;
  } catch (const nlohmann::json::exception& e) {
    fail_read(side, e.what());
  }
  if (j.value("schema", "") != kRawSchema) fail_read(side, "unknown sidecar schema");
  const int w = j.value("width", 0);
  const int h = j.value("height", 0);
  if (w <= 0 || h <= 0) fail_read(side, "bad dimensions");
  const std::string mask_rel = j.value("mask_file", "");
  if (mask_rel.empty()) fail_read(side, "missing mask_file");
  const std::filesystem::path mask_path = path.parent_path() / mask_rel;

  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<float> data(n);
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_read(path, "cannot open");
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * 4));
    if (!in) fail_read(path, "truncated pixel data");
  }
  std::vector<std::uint8_t> mask(n);
  {
    std::ifstream in(mask_path, std::ios::binary);
    if (!in) fail_read(mask_path, "cannot open mask");
    in.read(reinterpret_cast<char*>(mask.data()), static_cast<std::streamsize>(n));
    if (!in) fail_read(mask_path, "truncated mask data");
  }

  static_assert(std::endian::native == std::endian::little,
                "raw depth I/O assumes a little-endian host");
  DepthGrid grid(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] == 0) continue;
    if (mask[i] != 1) fail_read(mask_path, "mask bytes must be 0 or 1");
    const float v = data[i];
    if (!std::isfinite(v) || v <= 0.0f) fail_read(path, "valid pixel with non-positive depth");
    grid.depth[i] = static_cast<double>(v);
    grid.mask[i] = 1;
  }
  return grid;
}

void write_depth_raw(const std::filesystem::path& path, const DepthGrid& grid) {
  grid.validate();
  static_assert(std::endian::native == std::endian::little,
                "raw depth I/O assumes a little-endian host");

  std::filesystem::path mask_path = path;
  mask_path += ".mask";

  {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_write(path, "cannot open");
    std::vector<float> data(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      data[i] = grid.mask[i] ? static_cast<float>(grid.depth[i]) : 0.0f;
    }
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * 4));
    if (!out) fail_write(path, "short write");
  }
  {
    std::ofstream out(mask_path, std::ios::binary);
    if (!out) fail_write(mask_path, "cannot open");
    out.write(reinterpret_cast<const char*>(grid.mask.data()),
              static_cast<std::streamsize>(grid.mask.size()));
    if (!out) fail_write(mask_path, "short write");
  }
  {
    nlohmann::ordered_json j;
    j["schema"] = kRawSchema;
    j["width"] = grid.width;
    j["height"] = grid.height;
    j["mask_file"] = mask_path.filename().string();
    std::ofstream out(sidecar_path(path));
    if (!out) fail_write(sidecar_path(path), "cannot open");
    out << j.dump(2) << "\n";
    if (!out) fail_write(sidecar_path(path), "short write");
  }
}

// ---------------------------------------------------------------------------

DepthGrid read_depth(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return read_depth_png16(path);
  if (ext == ".pfm") return read_depth_pfm(path);
  if (ext == ".raw") return read_depth_raw(path);
  fail_read(path, "unsupported depth format '" + ext + "'");
}

void write_depth(const std::filesystem::path& path, const DepthGrid& grid) {
  const std::string ext = lower_ext(path);
  if (ext == ".png") return write_depth_png16(path, grid);
  if (ext == ".pfm") return write_depth_pfm(path, grid);
  if (ext == ".raw") return write_depth_raw(path, grid);
  fail_write(path, "unsupported depth format '" + ext + "'");
}

// ---------------------------------------------------------------------------
// prompt and cloud text formats

SparsePrompt read_prompt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_read(path, "cannot open");
  SparsePrompt prompt;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    PromptEntry e;
    if (!(ls >> e.x >> e.y >> e.d)) {
      fail_read(path, "malformed prompt record on line " + std::to_string(line_no));
    }
    prompt.entries.push_back(e);
  }
  prompt.validate();
  return prompt;
}

void write_prompt(const std::filesystem::path& path, const SparsePrompt& prompt) {
  std::ofstream out(path);
  if (!out) fail_write(path, "cannot open");
  char buf[64];
  for (const PromptEntry& e : prompt.entries) {
    std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", e.x, e.y, e.d);
    out << buf;
  }
  if (!out) fail_write(path, "short write");
}

PointCloud read_cloud_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_read(path, "cannot open");
  std::vector<Vec3> pts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x >> p.y >> p.z)) {
      fail_read(path, "malformed point record on line " + std::to_string(line_no));
    }
    pts.push_back(p);
  }
  return PointCloud::from_points(std::move(pts));
}

void write_cloud_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) fail_write(path, "cannot open");
  char buf[128];
  for (const Vec3& p : cloud.points) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x, p.y, p.z);
    out << buf;
  }
  if (!out) fail_write(path, "short write");
}

}  // namespace metricforge
