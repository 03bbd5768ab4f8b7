#include "metricforge/calibration.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "metricforge/errors.hpp"

namespace metricforge {

namespace {

constexpr double kZFloor = 1e-6;       // meters; excludes degenerate rays
constexpr double kWeightFloor = 1e-9;  // pixels; Weiszfeld singularity guard
constexpr std::size_t kMinPoints = 10;

struct Sample {
  double ux, uy;  // (X0, X1) / X2
  double rx, ry;  // pixel coordinates relative to the image center
  double w;       // caller-supplied confidence
};

double objective(const std::vector<Sample>& samples, double f) {
  double sum = 0.0;
  for (const Sample& s : samples) {
    const double ex = s.rx - f * s.ux;
    const double ey = s.ry - f * s.uy;
    sum += s.w * std::sqrt(ex * ex + ey * ey);
  }
  return sum;
}

}  // namespace

FocalEstimate estimate_focal(const PointMap& pmap, int max_iters, double tol,
                             const std::vector<double>* weights,
                             std::vector<double>* objective_trace) {
  if (max_iters < 0 || !(tol > 0.0)) {
    raise(ErrorCode::InvalidArgument, "max_iters must be >= 0 and tol > 0");
  }
  if (weights && weights->size() != pmap.coords.size()) {
    raise(ErrorCode::DimensionMismatch, "weight grid does not match the point map");
  }

  const double center_x = pmap.width / 2.0;
  const double center_y = pmap.height / 2.0;

  std::vector<Sample> samples;
  samples.reserve(pmap.coords.size());
  double u_norm_sq = 0.0;
  for (int y = 0; y < pmap.height; ++y) {
    for (int x = 0; x < pmap.width; ++x) {
      const std::size_t i = pmap.index(x, y);
      if (!pmap.mask[i]) continue;
      const Vec3& p = pmap.coords[i];
      if (!(p.z > kZFloor)) continue;
      Sample s;
      s.ux = p.x / p.z;
      s.uy = p.y / p.z;
      s.rx = x - center_x;
      s.ry = y - center_y;
      s.w = weights ? (*weights)[i] : 1.0;
      if (s.w < 0.0) {
        raise(ErrorCode::InvalidArgument, "confidence weights must be >= 0");
      }
      samples.push_back(s);
      u_norm_sq += s.ux * s.ux + s.uy * s.uy;
    }
  }
  if (samples.size() < kMinPoints) {
    raise(ErrorCode::InsufficientPoints,
          "need >= " + std::to_string(kMinPoints) + " usable pixels, have " +
              std::to_string(samples.size()));
  }
  if (u_norm_sq < 1e-12) {
    raise(ErrorCode::DegenerateRays, "all rays lie on the principal axis");
  }

  // Uniform-weight least squares start.
  double num = 0.0, den = 0.0;
  for (const Sample& s : samples) {
    num += s.w * (s.ux * s.rx + s.uy * s.ry);
    den += s.w * (s.ux * s.ux + s.uy * s.uy);
  }
  double f = num / den;

  double obj = objective(samples, f);
  if (objective_trace) {
    objective_trace->clear();
    objective_trace->push_back(obj);
  }

  FocalEstimate est;
  est.converged = false;
  int it = 0;
  for (; it < max_iters; ++it) {
    num = 0.0;
    den = 0.0;
    for (const Sample& s : samples) {
      const double ex = s.rx - f * s.ux;
      const double ey = s.ry - f * s.uy;
      const double wp = std::max(std::sqrt(ex * ex + ey * ey), kWeightFloor);
      num += s.w * (s.ux * s.rx + s.uy * s.ry) / wp;
      den += s.w * (s.ux * s.ux + s.uy * s.uy) / wp;
    }
    const double f_next = num / den;
    const double change = std::abs(f_next - f) / std::max(std::abs(f), 1e-30);
    f = f_next;
    obj = objective(samples, f);
    if (objective_trace) objective_trace->push_back(obj);
    if (change < tol) {
      est.converged = true;
      ++it;
      break;
    }
  }

  if (!(f > 0.0)) {
    raise(ErrorCode::DegenerateRays, "recovered focal is non-positive");
  }
  est.focal = f;
  est.iterations = it;
  est.final_objective = obj;
  return est;
}

}  // namespace metricforge
