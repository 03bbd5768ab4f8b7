#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "metricforge/grid.hpp"
#include "metricforge/rng.hpp"

namespace metricforge {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

// Row-major 3x3 matrix.
struct Mat3 {
  double m[9] = {1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }

  double operator()(int r, int c) const { return m[r * 3 + c]; }
  double& operator()(int r, int c) { return m[r * 3 + c]; }

  Vec3 apply(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 transpose() const {
    Mat3 t;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
    return t;
  }

  Mat3 mul(const Mat3& o) const {
    Mat3 p;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += (*this)(r, k) * o(k, c);
        p(r, c) = s;
      }
    return p;
  }

  double determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

// Pinhole camera. fx/fy/cx/cy in pixels.
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  int width = 0, height = 0;

  void validate() const;  // throws InvalidIntrinsics
};

// Sensor-to-camera rigid transform [R | t].
struct RigidTransform {
  Mat3 rotation;
  Vec3 translation;

  static RigidTransform identity() { return RigidTransform{}; }

  Vec3 apply(const Vec3& p) const { return rotation.apply(p) + translation; }

  RigidTransform compose(const RigidTransform& inner) const {
    // (*this) o inner: first inner, then this.
    return {rotation.mul(inner.rotation), rotation.apply(inner.translation) + translation};
  }

  RigidTransform inverse() const {
    const Mat3 rt = rotation.transpose();
    return {rt, rt.apply(translation) * -1.0};
  }

  void validate() const;  // throws InvalidTransform
};

struct PointCloud {
  std::vector<Vec3> points;

  // Rejects non-finite coordinates.
  static PointCloud from_points(std::vector<Vec3> pts);
};

// Per-pixel camera-frame coordinates with validity mask.
// Valid pixels have coords z > 0.
struct PointMap {
  int width = 0;
  int height = 0;
  std::vector<Vec3> coords;
  std::vector<std::uint8_t> mask;

  PointMap() = default;
  PointMap(int w, int h)
      : width(w), height(h), coords(static_cast<std::size_t>(w) * h),
        mask(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : mask) n += m;
    return n;
  }
};

// Sub-pixel assignment: floor after projection. The snap tolerance absorbs
// the few-ulp rounding that unproject->project round trips produce at exact
// pixel centers; it is far below any meaningful sub-pixel offset.
inline constexpr double kPixelSnap = 1e-7;

inline int pixel_bin(double u) { return static_cast<int>(std::floor(u + kPixelSnap)); }

// Maps each sensor-frame point to the camera frame, projects through the
// pinhole model and keeps the minimum depth per pixel (z-buffer). Points with
// camera-frame Z <= 0 or out-of-bounds pixel coordinates are discarded.
// Depth ties resolve to the first point in input order.
DepthGrid project_points(const PointCloud& cloud, const RigidTransform& pose,
                         const CameraIntrinsics& cam);

// Inverse of the pinhole projection: X = (u-cx)*d/fx, Y = (v-cy)*d/fy, Z = d.
PointMap unproject_depth(const DepthGrid& grid, const CameraIntrinsics& cam);

enum class SceneKind { Plane, Sphere, BoxRoom };

struct SceneSpec {
  SceneKind kind = SceneKind::Plane;
  CameraIntrinsics cam;
  // Plane: fronto-parallel at z = plane_z.
  double plane_z = 10.0;
  // Sphere: radius sphere_radius centered at (0, 0, sphere_center_z).
  double sphere_radius = 1.0;
  double sphere_center_z = 5.0;
  // Box room: walls at x = +-room_half_width, y = +-room_half_height,
  // front wall at z = room_depth. Camera at the origin looking down +z.
  double room_half_width = 4.0;
  double room_half_height = 3.0;
  double room_depth = 12.0;
  // When set, the cloud is expressed in a random sensor frame and the
  // matching sensor-to-camera pose is returned; otherwise identity.
  bool random_pose = true;
};

struct SyntheticScene {
  PointCloud cloud;        // sensor frame
  RigidTransform pose;     // sensor -> camera
  CameraIntrinsics cam;
  DepthGrid analytic;      // closed-form projected depth
};

// Builds a cloud whose projected depth is known in closed form, one point per
// covered pixel. Same seed gives bitwise-identical outputs.
SyntheticScene make_synthetic_scene(std::uint64_t seed, const SceneSpec& spec);

// Uniformly random rotation (axis-angle) and translation in [-2, 2]^3.
RigidTransform random_rigid_transform(Rng& rng);

}  // namespace metricforge
