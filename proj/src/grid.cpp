#include "metricforge/grid.hpp"

#include <cmath>
#include <string>

#include "metricforge/errors.hpp"

namespace metricforge {

void DepthGrid::validate() const {
  if (width <= 0 || height <= 0) {
    raise(ErrorCode::DimensionMismatch, "grid dimensions must be positive");
  }
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (depth.size() != n || mask.size() != n) {
    raise(ErrorCode::DimensionMismatch,
          "depth/mask size " + std::to_string(depth.size()) + "/" + std::to_string(mask.size()) +
              " does not match " + std::to_string(width) + "x" + std::to_string(height));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i] != 0 && mask[i] != 1) {
      raise(ErrorCode::InvalidArgument, "mask values must be 0 or 1");
    }
    if (mask[i] == 1 && (!std::isfinite(depth[i]) || depth[i] <= 0.0)) {
      raise(ErrorCode::NonPositiveDepth,
            "valid pixel " + std::to_string(i) + " has depth " + std::to_string(depth[i]));
    }
  }
}

}  // namespace metricforge
