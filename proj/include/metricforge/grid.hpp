#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace metricforge {

// Per-pixel metric depth in meters with a binary validity mask.
// Invariants: depth/mask hold width*height entries, mask values are 0 or 1,
// and every valid pixel has a finite depth > 0.
struct DepthGrid {
  int width = 0;
  int height = 0;
  std::vector<double> depth;
  std::vector<std::uint8_t> mask;

  DepthGrid() = default;
  DepthGrid(int w, int h)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0),
        mask(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t size() const { return depth.size(); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool valid(int x, int y) const { return mask[index(x, y)] != 0; }
  double at(int x, int y) const { return depth[index(x, y)]; }

  void set(int x, int y, double d) {
    depth[index(x, y)] = d;
    mask[index(x, y)] = 1;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : mask) n += m;
    return n;
  }

  // Throws Error on any invariant violation.
  void validate() const;
};

// Grid of unconstrained per-pixel values (inverse depth, normalized maps,
// gradients). Same layout as DepthGrid but without the positivity invariant.
struct ValueMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;

  ValueMap() = default;
  ValueMap(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0),
        mask(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t size() const { return values.size(); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool valid(int x, int y) const { return mask[index(x, y)] != 0; }
  double at(int x, int y) const { return values[index(x, y)]; }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : mask) n += m;
    return n;
  }
};

inline ValueMap to_value_map(const DepthGrid& g) {
  ValueMap out(g.width, g.height);
  out.values = g.depth;
  out.mask = g.mask;
  return out;
}

}  // namespace metricforge
