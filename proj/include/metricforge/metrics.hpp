#pragma once

#include <cstdint>
#include <vector>

#include "metricforge/grid.hpp"

namespace metricforge {

struct MetricsReport {
  double abs_rel = 0.0;
  double rmse = 0.0;    // meters
  double mae = 0.0;     // meters
  double log10 = 0.0;
  double delta1 = 0.0;  // percentages, 0..100
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::int64_t pixel_count = 0;
};

// All six depth statistics over the joint valid mask. delta_k uses the
// nested thresholds 1.25, 1.25^2, 1.25^3. Throws EmptyOverlap on empty
// joint mask and NonPositiveDepth if any overlapping value is <= 0.
MetricsReport depth_metrics(const DepthGrid& pred, const DepthGrid& gt);

// Pixel-count-weighted associative merge; rmse merges through its square.
MetricsReport merge_metrics(const std::vector<MetricsReport>& parts);

struct BoundaryRecord {
  double threshold_percent = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Raw ordered-pair counts, kept so reports merge exactly.
  std::int64_t gt_contours = 0;
  std::int64_t pred_contours = 0;
  std::int64_t matched = 0;
};

struct BoundaryReport {
  std::vector<BoundaryRecord> records;
  double mean_f1 = 0.0;
};

inline const std::vector<double>& default_boundary_thresholds() {
  static const std::vector<double> t{5.0, 10.0, 15.0, 20.0, 25.0};
  return t;
}

// Occluding-contour precision/recall/F1 over ordered neighbor pairs (right
// and down, both orientations). A pair is a contour when d(j)/d(i) exceeds
// 1 + t/100. Pairs touching an invalid pixel in either map are skipped.
// Ratios with zero denominator report 0; F1 is 0 when precision + recall
// is 0. Precision divides by the gt contour count and recall by the
// prediction contour count, exactly as the protocol's printed formulas.
BoundaryReport boundary_f1(const DepthGrid& pred, const DepthGrid& gt,
                           const std::vector<double>& thresholds = default_boundary_thresholds());

BoundaryReport merge_boundary(const std::vector<BoundaryReport>& parts);

// Absolute difference of horizontal fields of view 2*atan(w/(2f)), degrees.
double fov_error_deg(double pred_focal, double gt_focal, double width);

}  // namespace metricforge
