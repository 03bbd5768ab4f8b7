#include "metricforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metricforge/errors.hpp"

namespace metricforge {

namespace {

constexpr double kDelta1 = 1.25;
constexpr double kDelta2 = 1.25 * 1.25;
constexpr double kDelta3 = 1.25 * 1.25 * 1.25;

void check_same_shape(const DepthGrid& a, const DepthGrid& b) {
  if (a.width != b.width || a.height != b.height) {
    raise(ErrorCode::DimensionMismatch, "grid shapes " + std::to_string(a.width) + "x" +
                                            std::to_string(a.height) + " vs " +
                                            std::to_string(b.width) + "x" +
                                            std::to_string(b.height));
  }
}

}  // namespace

MetricsReport depth_metrics(const DepthGrid& pred, const DepthGrid& gt) {
  check_same_shape(pred, gt);

  double sum_abs_rel = 0.0, sum_sq = 0.0, sum_abs = 0.0, sum_log10 = 0.0;
  std::int64_t n = 0, n1 = 0, n2 = 0, n3 = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(pred.mask[i] & gt.mask[i])) continue;
    const double dp = pred.depth[i];
    const double dg = gt.depth[i];
    if (!(dp > 0.0) || !(dg > 0.0)) {
      raise(ErrorCode::NonPositiveDepth, "overlapping pixel with non-positive depth");
    }
    const double err = dp - dg;
    sum_abs_rel += std::abs(err) / dg;
    sum_sq += err * err;
    sum_abs += std::abs(err);
    sum_log10 += std::abs(std::log10(dp) - std::log10(dg));
    const double ratio = std::max(dp / dg, dg / dp);
    if (ratio < kDelta1) ++n1;
    if (ratio < kDelta2) ++n2;
    if (ratio < kDelta3) ++n3;
    ++n;
  }
  if (n == 0) {
    raise(ErrorCode::EmptyOverlap, "prediction and ground truth share no valid pixels");
  }

  MetricsReport r;
  r.pixel_count = n;
  const double dn = static_cast<double>(n);
  r.abs_rel = sum_abs_rel / dn;
  r.rmse = std::sqrt(sum_sq / dn);
  r.mae = sum_abs / dn;
  r.log10 = sum_log10 / dn;
  r.delta1 = 100.0 * n1 / dn;
  r.delta2 = 100.0 * n2 / dn;
  r.delta3 = 100.0 * n3 / dn;
  return r;
}

MetricsReport merge_metrics(const std::vector<MetricsReport>& parts) {
  MetricsReport out;
  double wsum = 0.0;
  double sq = 0.0;
  for (const MetricsReport& p : parts) {
    const double w = static_cast<double>(p.pixel_count);
    out.abs_rel += w * p.abs_rel;
    sq += w * p.rmse * p.rmse;
    out.mae += w * p.mae;
    out.log10 += w * p.log10;
    out.delta1 += w * p.delta1;
    out.delta2 += w * p.delta2;
    out.delta3 += w * p.delta3;
    out.pixel_count += p.pixel_count;
    wsum += w;
  }
  if (wsum > 0.0) {
    out.abs_rel /= wsum;
    out.rmse = std::sqrt(sq / wsum);
    out.mae /= wsum;
    out.log10 /= wsum;
    out.delta1 /= wsum;
    out.delta2 /= wsum;
    out.delta3 /= wsum;
  }
  return out;
}

BoundaryReport boundary_f1(const DepthGrid& pred, const DepthGrid& gt,
                           const std::vector<double>& thresholds) {
  check_same_shape(pred, gt);
  if (thresholds.empty()) {
    raise(ErrorCode::InvalidArgument, "at least one boundary threshold is required");
  }

  std::size_t overlap = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) overlap += pred.mask[i] & gt.mask[i];
  if (overlap == 0) {
    raise(ErrorCode::EmptyOverlap, "prediction and ground truth share no valid pixels");
  }

  BoundaryReport report;
  report.records.resize(thresholds.size());
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    report.records[t].threshold_percent = thresholds[t];
  }

  // Ordered neighbor pairs: right and down, both orientations. A pair
  // participates only when both pixels are valid in both maps.
  const auto visit_pair = [&](std::size_t i, std::size_t j) {
    const double gp = gt.depth[j] / gt.depth[i];
    const double pp = pred.depth[j] / pred.depth[i];
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const double lim = 1.0 + thresholds[t] / 100.0;
      const bool cg = gp > lim;
      const bool cp = pp > lim;
      BoundaryRecord& rec = report.records[t];
      rec.gt_contours += cg;
      rec.pred_contours += cp;
      rec.matched += cg && cp;
    }
  };

  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      const std::size_t i = gt.index(x, y);
      if (!(pred.mask[i] & gt.mask[i])) continue;
      if (x + 1 < gt.width) {
        const std::size_t j = i + 1;
        if (pred.mask[j] & gt.mask[j]) {
          visit_pair(i, j);
          visit_pair(j, i);
        }
      }
      if (y + 1 < gt.height) {
        const std::size_t j = i + gt.width;
        if (pred.mask[j] & gt.mask[j]) {
          visit_pair(i, j);
          visit_pair(j, i);
        }
      }
    }
  }

  double f1_sum = 0.0;
  for (BoundaryRecord& rec : report.records) {
    rec.precision = rec.gt_contours > 0 ? static_cast<double>(rec.matched) / rec.gt_contours : 0.0;
    rec.recall = rec.pred_contours > 0 ? static_cast<double>(rec.matched) / rec.pred_contours : 0.0;
    rec.f1 = (rec.precision + rec.recall) > 0.0
                 ? 2.0 * rec.precision * rec.recall / (rec.precision + rec.recall)
                 : 0.0;
    f1_sum += rec.f1;
  }
  report.mean_f1 = f1_sum / static_cast<double>(report.records.size());
  return report;
}

BoundaryReport merge_boundary(const std::vector<BoundaryReport>& parts) {
  BoundaryReport out;
  for (const BoundaryReport& p : parts) {
    if (out.records.empty()) {
      out.records.resize(p.records.size());
      for (std::size_t t = 0; t < p.records.size(); ++t) {
        out.records[t].threshold_percent = p.records[t].threshold_percent;
      }
    }
    if (p.records.size() != out.records.size()) {
      raise(ErrorCode::InvalidArgument, "cannot merge boundary reports with different sweeps");
    }
    for (std::size_t t = 0; t < p.records.size(); ++t) {
      out.records[t].gt_contours += p.records[t].gt_contours;
      out.records[t].pred_contours += p.records[t].pred_contours;
      out.records[t].matched += p.records[t].matched;
    }
  }
  double f1_sum = 0.0;
  for (BoundaryRecord& rec : out.records) {
    rec.precision = rec.gt_contours > 0 ? static_cast<double>(rec.matched) / rec.gt_contours : 0.0;
    rec.recall = rec.pred_contours > 0 ? static_cast<double>(rec.matched) / rec.pred_contours : 0.0;
    rec.f1 = (rec.precision + rec.recall) > 0.0
                 ? 2.0 * rec.precision * rec.recall / (rec.precision + rec.recall)
                 : 0.0;
    f1_sum += rec.f1;
  }
  out.mean_f1 = out.records.empty() ? 0.0 : f1_sum / static_cast<double>(out.records.size());
  return out;
}

double fov_error_deg(double pred_focal, double gt_focal, double width) {
  if (!(pred_focal > 0.0) || !(gt_focal > 0.0)) {
    raise(ErrorCode::NonPositiveFocal, "focal lengths must be positive");
  }
  if (!(width > 0.0)) {
    raise(ErrorCode::InvalidArgument, "image width must be positive");
  }
  const double fov_pred = 2.0 * std::atan(width / (2.0 * pred_focal));
  const double fov_gt = 2.0 * std::atan(width / (2.0 * gt_focal));
  return std::abs(fov_pred - fov_gt) * 180.0 / 3.141592653589793238462643383280;
}

}  // namespace metricforge
