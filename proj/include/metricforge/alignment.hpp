#pragma once

#include <cstdint>
#include <vector>

#include "metricforge/grid.hpp"
#include "metricforge/prompting.hpp"

namespace metricforge {

struct AffineFit {
  double scale = 1.0;
  double shift = 0.0;          // meters
  double residual_rms = 0.0;   // meters
  std::size_t sample_count = 0;
};

// Dense per-pixel scale multipliers with validity mask.
struct ScaleField {
  int width = 0;
  int height = 0;
  std::vector<double> scale;
  std::vector<std::uint8_t> mask;

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

// Closed-form least squares for (a, b) minimizing sum (a*source + b - d)^2
// over prompt points that land on valid source pixels. Accumulation runs in
// row-major pixel order, so the result is bitwise independent of prompt
// ordering. Throws DegenerateFit with < 2 usable points or when all sampled
// source values are equal.
AffineFit lsq_scale_shift(const DepthGrid& source, const SparsePrompt& targets);

// At each prompt pixel the field carries its own ratio d_i / source; every
// other valid pixel gets the inverse-distance-weighted mean of its k nearest
// prompt ratios (Euclidean pixel distance, weight power 1). Distance ties at
// the k-th anchor break by lowest (y, x) pixel order.
ScaleField pixelwise_scale_field(const DepthGrid& source, const SparsePrompt& targets, int k);

}  // namespace metricforge
