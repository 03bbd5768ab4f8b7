#pragma once

#include <vector>

#include "metricforge/geometry.hpp"

namespace metricforge {

struct FocalEstimate {
  double focal = 0.0;            // pixels
  int iterations = 0;
  double final_objective = 0.0;  // sum of residual norms, pixels
  bool converged = false;
};

// Recovers the focal length from a camera-frame point map by minimizing
// sum_p || (i', j') - f * (X0, X1)/X2 || with (i', j') taken relative to the
// image center (w/2, h/2). Solved by Weiszfeld-type IRLS from the uniform
// least-squares start; the objective is non-increasing at every iteration.
//
// `weights` optionally supplies per-pixel confidences (width*height
// entries); the default is uniform. `objective_trace`, when given, receives
// the objective value at the start and after each iteration.
//
// Throws InsufficientPoints with fewer than 10 usable pixels (valid and
// z > 1e-6) and DegenerateRays when sum ||u_p||^2 < 1e-12.
FocalEstimate estimate_focal(const PointMap& pmap, int max_iters = 100, double tol = 1e-10,
                             const std::vector<double>* weights = nullptr,
                             std::vector<double>* objective_trace = nullptr);

}  // namespace metricforge
