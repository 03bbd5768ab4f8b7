#include "metricforge/geometry.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "metricforge/errors.hpp"

namespace metricforge {

namespace {

constexpr double kOrthoTol = 1e-9;

bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (width <= 0 || height <= 0) {
    raise(ErrorCode::InvalidIntrinsics, "image dimensions must be positive");
  }
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    raise(ErrorCode::InvalidIntrinsics, "focal lengths must be positive and finite");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    raise(ErrorCode::InvalidIntrinsics, "principal point outside the image");
  }
}

void RigidTransform::validate() const {
  const Mat3 rtr = rotation.transpose().mul(rotation);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double want = (r == c) ? 1.0 : 0.0;
      if (std::abs(rtr(r, c) - want) > kOrthoTol) {
        raise(ErrorCode::InvalidTransform, "rotation is not orthonormal");
      }
    }
  }
  if (std::abs(rotation.determinant() - 1.0) > kOrthoTol) {
    raise(ErrorCode::InvalidTransform, "rotation determinant is not +1");
  }
  if (!finite(translation)) {
    raise(ErrorCode::InvalidTransform, "translation is not finite");
  }
}

PointCloud PointCloud::from_points(std::vector<Vec3> pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!finite(pts[i])) {
      raise(ErrorCode::NonFinitePoint, "point " + std::to_string(i) + " has non-finite coordinates");
    }
  }
  return PointCloud{std::move(pts)};
}

DepthGrid project_points(const PointCloud& cloud, const RigidTransform& pose,
                         const CameraIntrinsics& cam) {
  if (cloud.points.empty()) {
    raise(ErrorCode::EmptyCloud, "point cloud has no points");
  }
  cam.validate();
  pose.validate();

  DepthGrid grid(cam.width, cam.height);
  for (const Vec3& p : cloud.points) {
    const Vec3 c = pose.apply(p);
    if (c.z <= 0.0) continue;
    const int px = pixel_bin(cam.fx * (c.x / c.z) + cam.cx);
    const int py = pixel_bin(cam.fy * (c.y / c.z) + cam.cy);
    if (!grid.in_bounds(px, py)) continue;
    const std::size_t idx = grid.index(px, py);
    // Strict comparison keeps the first point on exact depth ties.
    if (grid.mask[idx] == 0 || c.z < grid.depth[idx]) {
      grid.depth[idx] = c.z;
      grid.mask[idx] = 1;
    }
  }
  return grid;
}

PointMap unproject_depth(const DepthGrid& grid, const CameraIntrinsics& cam) {
  cam.validate();
  if (grid.width != cam.width || grid.height != cam.height) {
    raise(ErrorCode::DimensionMismatch,
          "grid " + std::to_string(grid.width) + "x" + std::to_string(grid.height) +
              " does not match camera " + std::to_string(cam.width) + "x" +
              std::to_string(cam.height));
  }

  PointMap pm(grid.width, grid.height);
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      const std::size_t idx = grid.index(x, y);
      if (grid.mask[idx] == 0) continue;
      const double d = grid.depth[idx];
      pm.coords[idx] = {(x - cam.cx) * d / cam.fx, (y - cam.cy) * d / cam.fy, d};
      pm.mask[idx] = 1;
    }
  }
  return pm;
}

RigidTransform random_rigid_transform(Rng& rng) {
  // Uniform axis from a normalized gaussian triple, uniform angle.
  Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
  double n = axis.norm();
  while (n < 1e-9) {
    axis = {rng.normal(), rng.normal(), rng.normal()};
    n = axis.norm();
  }
  axis = axis * (1.0 / n);
  const double angle = rng.uniform(0.0, 3.141592653589793238462643383280);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double t = 1.0 - c;

  Mat3 r;
  r(0, 0) = t * axis.x * axis.x + c;
  r(0, 1) = t * axis.x * axis.y - s * axis.z;
  r(0, 2) = t * axis.x * axis.z + s * axis.y;
  r(1, 0) = t * axis.x * axis.y + s * axis.z;
  r(1, 1) = t * axis.y * axis.y + c;
  r(1, 2) = t * axis.y * axis.z - s * axis.x;
  r(2, 0) = t * axis.x * axis.z - s * axis.y;
  r(2, 1) = t * axis.y * axis.z + s * axis.x;
  r(2, 2) = t * axis.z * axis.z + c;

  const Vec3 tr{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
  return RigidTransform{r, tr};
}

namespace {

// Ray through integer pixel (x, y): ((x-cx)/fx, (y-cy)/fy, 1). The metric
// depth of a point t*ray equals t.
Vec3 pixel_ray(const CameraIntrinsics& cam, int x, int y) {
  return {(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0};
}

// Depth of the first sphere intersection along the pixel ray, or 0 if the
// ray misses. Sphere centered at (0, 0, zc) with radius r.
double sphere_depth(const Vec3& ray, double zc, double r) {
  const double a = ray.dot(ray);
  const double b = -2.0 * ray.z * zc;
  const double c = zc * zc - r * r;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return 0.0;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  return t > 0.0 ? t : 0.0;
}

double box_room_depth(const Vec3& ray, double half_w, double half_h, double depth) {
  double t = depth;  // front wall, ray.z == 1
  if (ray.x != 0.0) t = std::min(t, half_w / std::abs(ray.x));
  if (ray.y != 0.0) t = std::min(t, half_h / std::abs(ray.y));
  return t;
}

}  // namespace

SyntheticScene make_synthetic_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.cam.validate();
  switch (spec.kind) {
    case SceneKind::Plane:
    case SceneKind::Sphere:
    case SceneKind::BoxRoom:
      break;
    default:
      raise(ErrorCode::UnknownSceneKind, "unsupported scene kind");
  }
  if (spec.kind == SceneKind::Plane && spec.plane_z <= 0.0) {
    raise(ErrorCode::InvalidArgument, "plane_z must be positive");
  }
  if (spec.kind == SceneKind::Sphere &&
      (spec.sphere_radius <= 0.0 || spec.sphere_center_z <= spec.sphere_radius)) {
    raise(ErrorCode::InvalidArgument, "sphere must lie fully in front of the camera");
  }
  if (spec.kind == SceneKind::BoxRoom &&
      (spec.room_half_width <= 0.0 || spec.room_half_height <= 0.0 || spec.room_depth <= 0.0)) {
    raise(ErrorCode::InvalidArgument, "box room parameters must be positive");
  }

  Rng rng(seed);
  RigidTransform pose = RigidTransform::identity();
  if (spec.random_pose) pose = random_rigid_transform(rng);
  const RigidTransform camera_to_sensor = pose.inverse();

  SyntheticScene scene;
  scene.pose = pose;
  scene.cam = spec.cam;
  scene.analytic = DepthGrid(spec.cam.width, spec.cam.height);

  std::vector<Vec3> pts;
  pts.reserve(scene.analytic.size());
  for (int y = 0; y < spec.cam.height; ++y) {
    for (int x = 0; x < spec.cam.width; ++x) {
      const Vec3 ray = pixel_ray(spec.cam, x, y);
      double t = 0.0;
      switch (spec.kind) {
        case SceneKind::Plane: t = spec.plane_z; break;
        case SceneKind::Sphere: t = sphere_depth(ray, spec.sphere_center_z, spec.sphere_radius); break;
        case SceneKind::BoxRoom:
          t = box_room_depth(ray, spec.room_half_width, spec.room_half_height, spec.room_depth);
          break;
      }
      if (t <= 0.0) continue;
      scene.analytic.set(x, y, t);
      pts.push_back(camera_to_sensor.apply(ray * t));
    }
  }
  scene.cloud = PointCloud::from_points(std::move(pts));
  return scene;
}

}  // namespace metricforge
