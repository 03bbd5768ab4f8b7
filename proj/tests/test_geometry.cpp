#include "doctest.h"

#include <cmath>

#include "metricforge/errors.hpp"
#include "metricforge/geometry.hpp"

#include "test_util.hpp"

using namespace metricforge;
using test::centered_camera;
using test::random_grid;
using test::zbuffer_oracle;

namespace {

PointCloud single_point(double x, double y, double z) {
  return PointCloud::from_points({{x, y, z}});
}

}  // namespace

TEST_CASE("project_points maps a principal-axis point to the principal pixel") {
  const CameraIntrinsics cam{100.0, 100.0, 50.0, 50.0, 100, 100};
  const DepthGrid g = project_points(single_point(0, 0, 5), RigidTransform::identity(), cam);
  CHECK(g.valid(50, 50));
  CHECK(g.at(50, 50) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(g.valid_count() == 1);
}

TEST_CASE("project_points keeps the minimum depth per pixel") {
  const CameraIntrinsics cam{100.0, 100.0, 50.0, 50.0, 100, 100};
  const PointCloud cloud = PointCloud::from_points({{0, 0, 5}, {0, 0, 3}});
  const DepthGrid g = project_points(cloud, RigidTransform::identity(), cam);
  CHECK(g.at(50, 50) == 3.0);
}

TEST_CASE("project_points discards non-positive depth and out-of-bounds points") {
  const CameraIntrinsics cam{100.0, 100.0, 50.0, 50.0, 100, 100};
  const PointCloud cloud = PointCloud::from_points({
      {0, 0, -5},     // behind the camera
      {0, 0, 0},      // on the camera plane
      {100, 0, 1},    // projects far out of bounds
  });
  const DepthGrid g = project_points(cloud, RigidTransform::identity(), cam);
  CHECK(g.valid_count() == 0);
}

TEST_CASE("project_points validates inputs") {
  const CameraIntrinsics bad{0.0, 100.0, 50.0, 50.0, 100, 100};
  CHECK_THROWS_WITH_AS(project_points(single_point(0, 0, 5), RigidTransform::identity(), bad),
                       doctest::Contains("InvalidIntrinsics"), Error);
  const CameraIntrinsics cam{100.0, 100.0, 50.0, 50.0, 100, 100};
  CHECK_THROWS_AS(project_points(PointCloud{}, RigidTransform::identity(), cam), Error);
  CHECK_THROWS_AS(PointCloud::from_points({{0.0, 0.0, std::nan("")}}), Error);
}

TEST_CASE("plane scene projects to the analytic constant map") {
  SceneSpec spec;
  spec.kind = SceneKind::Plane;
  spec.plane_z = 10.0;
  spec.cam = centered_camera(64, 48, 80.0);
  const SyntheticScene scene = make_synthetic_scene(7, spec);

  for (std::size_t i = 0; i < scene.analytic.size(); ++i) {
    CHECK(scene.analytic.mask[i] == 1);
    CHECK(scene.analytic.depth[i] == 10.0);
  }

  const DepthGrid projected = project_points(scene.cloud, scene.pose, scene.cam);
  REQUIRE(projected.valid_count() == scene.analytic.valid_count());
  for (std::size_t i = 0; i < projected.size(); ++i) {
    REQUIRE(projected.mask[i] == 1);
    REQUIRE(projected.depth[i] == doctest::Approx(10.0).epsilon(1e-10));
  }
}

TEST_CASE("sphere scene has closed-form depth at the principal pixel") {
  SceneSpec spec;
  spec.kind = SceneKind::Sphere;
  spec.sphere_radius = 1.0;
  spec.sphere_center_z = 5.0;
  spec.cam = centered_camera(100, 100, 100.0);
  spec.random_pose = false;
  const SyntheticScene scene = make_synthetic_scene(3, spec);
  CHECK(scene.analytic.valid(50, 50));
  CHECK(scene.analytic.at(50, 50) == doctest::Approx(4.0).epsilon(1e-12));
  // Rays far from the axis miss the sphere.
  CHECK_FALSE(scene.analytic.valid(0, 0));
}

TEST_CASE("box room depth picks the nearest wall along each ray") {
  SceneSpec spec;
  spec.kind = SceneKind::BoxRoom;
  spec.room_half_width = 4.0;
  spec.room_half_height = 3.0;
  spec.room_depth = 12.0;
  spec.cam = centered_camera(100, 100, 50.0);
  spec.random_pose = false;
  const SyntheticScene scene = make_synthetic_scene(11, spec);
  // Principal ray hits the front wall.
  CHECK(scene.analytic.at(50, 50) == doctest::Approx(12.0).epsilon(1e-12));
  // Pixel (90, 50): ray x-slope (90-50)/50 = 0.8, side wall at x=4 is at
  // t = 4/0.8 = 5 < 12.
  CHECK(scene.analytic.at(90, 50) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("synthetic scenes are bitwise deterministic in the seed") {
  SceneSpec spec;
  spec.kind = SceneKind::BoxRoom;
  spec.cam = centered_camera(32, 24, 30.0);
  const SyntheticScene a = make_synthetic_scene(99, spec);
  const SyntheticScene b = make_synthetic_scene(99, spec);
  REQUIRE(a.cloud.points.size() == b.cloud.points.size());
  for (std::size_t i = 0; i < a.cloud.points.size(); ++i) {
    CHECK(a.cloud.points[i].x == b.cloud.points[i].x);
    CHECK(a.cloud.points[i].y == b.cloud.points[i].y);
    CHECK(a.cloud.points[i].z == b.cloud.points[i].z);
  }
  for (int i = 0; i < 9; ++i) CHECK(a.pose.rotation.m[i] == b.pose.rotation.m[i]);
  CHECK(a.analytic.depth == b.analytic.depth);
}

TEST_CASE("unproject_depth inverts the pinhole model") {
  const CameraIntrinsics cam{100.0, 100.0, 50.0, 50.0, 100, 100};
  DepthGrid g(100, 100);
  g.set(50, 50, 7.0);
  const PointMap pm = unproject_depth(g, cam);
  CHECK(pm.coords[pm.index(50, 50)].x == 0.0);
  CHECK(pm.coords[pm.index(50, 50)].y == 0.0);
  CHECK(pm.coords[pm.index(50, 50)].z == 7.0);
  CHECK(pm.valid_count() == 1);
}

TEST_CASE("unproject_depth passes the mask through") {
  const CameraIntrinsics cam = centered_camera(16, 12, 20.0);
  const DepthGrid g(16, 12);  // all invalid
  const PointMap pm = unproject_depth(g, cam);
  CHECK(pm.valid_count() == 0);
}

TEST_CASE("unproject_depth rejects mismatched dimensions") {
  const CameraIntrinsics cam = centered_camera(16, 12, 20.0);
  const DepthGrid g(8, 8);
  CHECK_THROWS_WITH_AS(unproject_depth(g, cam), doctest::Contains("DimensionMismatch"), Error);
}

TEST_CASE("project after unproject reproduces valid depths") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const CameraIntrinsics cam = centered_camera(48, 36, 60.0);
    const DepthGrid g = random_grid(48, 36, seed);
    const PointMap pm = unproject_depth(g, cam);

    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < pm.coords.size(); ++i) {
      if (pm.mask[i]) pts.push_back(pm.coords[i]);
    }
    const DepthGrid back = project_points(PointCloud::from_points(std::move(pts)),
                                          RigidTransform::identity(), cam);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.mask[i]) continue;
      REQUIRE(back.mask[i] == 1);
      REQUIRE(back.depth[i] == doctest::Approx(g.depth[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("projection matches the per-pixel-minimum oracle exactly") {
  Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const CameraIntrinsics cam = centered_camera(24, 18, 25.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 600; ++i) {
      pts.push_back({rng.uniform(-6, 6), rng.uniform(-5, 5), rng.uniform(-2, 12)});
    }
    const PointCloud cloud = PointCloud::from_points(std::move(pts));
    const RigidTransform pose = random_rigid_transform(rng);
    const DepthGrid got = project_points(cloud, pose, cam);
    const DepthGrid want = zbuffer_oracle(cloud, pose, cam);
    REQUIRE(got.mask == want.mask);
    REQUIRE(got.depth == want.depth);
    // No valid pixel may carry non-positive depth.
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got.mask[i]) REQUIRE(got.depth[i] > 0.0);
    }
  }
}

TEST_CASE("make_synthetic_scene rejects unknown kinds and bad parameters") {
  SceneSpec spec;
  spec.cam = centered_camera(8, 8, 10.0);
  spec.kind = static_cast<SceneKind>(99);
  CHECK_THROWS_WITH_AS(make_synthetic_scene(0, spec), doctest::Contains("UnknownSceneKind"),
                       Error);
  spec.kind = SceneKind::Sphere;
  spec.sphere_center_z = 0.5;  // camera inside the sphere
  CHECK_THROWS_AS(make_synthetic_scene(0, spec), Error);
}

TEST_CASE("depth grid validation enforces the invariants") {
  DepthGrid g(2, 2);
  g.validate();  // all-invalid is fine
  g.set(0, 0, 1.0);
  g.validate();
  g.mask[1] = 2;
  CHECK_THROWS_AS(g.validate(), Error);
  g.mask[1] = 1;
  g.depth[1] = 0.0;
  CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("NonPositiveDepth"), Error);
  g.mask[1] = 0;
  g.depth.pop_back();
  CHECK_THROWS_WITH_AS(g.validate(), doctest::Contains("DimensionMismatch"), Error);
}

TEST_CASE("rigid transform composition is associative") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform a = random_rigid_transform(rng);
    const RigidTransform b = random_rigid_transform(rng);
    const RigidTransform c = random_rigid_transform(rng);
    const RigidTransform ab_c = a.compose(b).compose(c);
    const RigidTransform a_bc = a.compose(b.compose(c));
    for (int i = 0; i < 9; ++i) {
      CHECK(ab_c.rotation.m[i] == doctest::Approx(a_bc.rotation.m[i]).epsilon(1e-12));
    }
    const Vec3 p{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const Vec3 q1 = ab_c.apply(p);
    const Vec3 q2 = a_bc.apply(p);
    CHECK(std::abs(q1.x - q2.x) < 1e-12);
    CHECK(std::abs(q1.y - q2.y) < 1e-12);
    CHECK(std::abs(q1.z - q2.z) < 1e-12);
  }
}

TEST_CASE("rigid transform inverse undoes the transform") {
  Rng rng(17);
  const RigidTransform t = random_rigid_transform(rng);
  const RigidTransform id = t.compose(t.inverse());
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      CHECK(id.rotation(r, c) == doctest::Approx(r == c ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
  CHECK(std::abs(id.translation.x) < 1e-12);
  t.validate();
}
