#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metricforge/grid.hpp"

namespace metricforge {

struct LossConfig {
  double alpha = 15.0;          // robust MAE weight (teacher)
  double beta = 5.0;            // SSI-MAGE weight (teacher, synthetic data)
  double gamma = 10.0;          // distance-balanced term weight (student)
  double delta = 2.0;           // SSI-MAGE weight in log space (student)
  double drop_fraction = 0.20;  // top-error drop ratio of the robust MAE
  int scale_count = 6;          // pyramid levels of the multi-scale gradient loss
  double balance_c = 400.0;     // distance-balance constant C
  double mad_epsilon = 1e-6;    // floor for the MAD denominator

  void validate() const;  // throws InvalidArgument
};

struct LossReport {
  double value = 0.0;
  // d(value)/d(prediction pixel); zero on masked-out and dropped pixels.
  // For robust_mae/ssi_mage this is with respect to the map handed in; for
  // teacher_loss/student_loss with respect to the metric depth prediction.
  ValueMap gradient;
  std::vector<std::uint8_t> active_mask;
};

// Per-pixel 1/d on valid pixels, mask preserved. Throws NonPositiveDepth if
// a valid pixel carries d <= 0.
ValueMap to_inverse_depth(const DepthGrid& grid);
ValueMap to_inverse_depth(const ValueMap& map);

// Mean absolute error over jointly valid pixels after excluding the
// ceil(drop_fraction * N) largest per-pixel errors. Ties at the drop
// boundary break by pixel index order.
LossReport robust_mae(const ValueMap& pred, const ValueMap& gt, const LossConfig& cfg);

// Subtracts the median of valid values and divides by max(MAD, mad_epsilon).
// Invalid pixels come out as 0 with mask preserved.
ValueMap mad_normalize(const ValueMap& map, const LossConfig& cfg);

// Scale-and-shift-invariant mean absolute gradient error: both maps are MAD
// normalized, then per pyramid level the Scharr x/y gradients are compared
// in L1 and averaged over valid pixels; the value is the mean over levels.
// Levels are built by 3x3 binomial blur and 2x decimation; a coarse pixel is
// valid iff all four fine children are. Levels smaller than 2x2 truncate the
// pyramid, so tiny images contribute 0.
LossReport ssi_mage(const ValueMap& pred, const ValueMap& gt, const LossConfig& cfg);

// Log-space depth value 1 - ln(d)/ln(C): 1 at d=1, 0 at d=C, strictly
// decreasing in d.
double dlog_transform(double d, const LossConfig& cfg);

// Teacher objective alpha * robust_mae + beta * ssi_mage in inverse-depth
// space; the SSI term applies only to synthetic data. Gradient is with
// respect to the metric depth prediction.
LossReport teacher_loss(const DepthGrid& pred, const DepthGrid& gt, const LossConfig& cfg,
                        bool synthetic);

// Student objective gamma * mean |Dlog(pred) - Dlog(gt)| + delta * ssi_mage
// applied in log space. Gradient is with respect to the metric depth
// prediction.
LossReport student_loss(const DepthGrid& pred, const DepthGrid& gt, const LossConfig& cfg);

struct GradcheckResult {
  double max_rel_err = 0.0;
  int checked = 0;
  int skipped = 0;  // pixels excluded at kinks / drop-rank ties
};

// Compares the analytic gradient of the named loss ("robust_mae",
// "ssi_mage", "teacher_loss", "teacher_loss_real", "student_loss") against
// central finite differences (step 1e-5) at every valid pixel of a seeded
// random instance. Pixels where the perturbation crosses a kink -- a changed
// drop set, median/MAD selection, or any absolute-value sign flip -- are
// skipped. Throws UnknownLoss for unregistered names.
GradcheckResult gradcheck(const std::string& loss_name, int width, int height,
                          std::uint64_t seed, const LossConfig& cfg = LossConfig{});

const std::vector<std::string>& gradcheck_loss_names();

}  // namespace metricforge
