#include <doctest.h>

#include <cmath>

#include "planefield/geometry.hpp"
#include "test_util.hpp"

using namespace planefield;
using test::make_camera;
using test::make_camera_at;
using test::random_rotation;
using test::uniform;

TEST_SUITE("geometry") {

TEST_CASE("pixel ray through the principal point is the optical axis") {
  const Camera cam = make_camera(100, 100);
  const Ray ray = pixel_ray(cam, cam.intrinsics.cx, cam.intrinsics.cy);
  CHECK(ray.origin.norm() == doctest::Approx(0.0));
  CHECK(ray.direction.x() == doctest::Approx(0.0));
  CHECK(ray.direction.y() == doctest::Approx(0.0));
  CHECK(ray.direction.z() == doctest::Approx(1.0));
}

TEST_CASE("pixel ray matches hand back-projection") {
  Camera cam = make_camera(200, 100);
  cam.intrinsics.cx = 50.0;
  cam.intrinsics.cy = 50.0;
  const Ray ray = pixel_ray(cam, 150.0, 50.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(ray.direction.x() == doctest::Approx(inv_sqrt2).epsilon(1e-9));
  CHECK(ray.direction.y() == doctest::Approx(0.0));
  CHECK(ray.direction.z() == doctest::Approx(inv_sqrt2).epsilon(1e-9));
}

TEST_CASE("pixel ray rejects out-of-range coordinates") {
  const Camera cam = make_camera(64, 64);
  CHECK_THROWS_AS(pixel_ray(cam, -1.0, 0.0), DomainError);
  CHECK_THROWS_AS(pixel_ray(cam, 0.0, 64.0), DomainError);
}

TEST_CASE("pixel rays have unit direction and project back") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Camera cam = make_camera_at(
        64, 48, uniform(rng, 50.0, 200.0),
        Eigen::Vector3d(uniform(rng, -2, 2), uniform(rng, -2, 2),
                        uniform(rng, -2, 2)),
        random_rotation(rng, 0.8));
    const double u = uniform(rng, 0.0, 64.0 - 1e-9);
    const double v = uniform(rng, 0.0, 48.0 - 1e-9);
    const Ray ray = pixel_ray(cam, u, v);
    CHECK(std::abs(ray.direction.norm() - 1.0) < 1e-9);
    const Eigen::Vector3d point = ray.origin + uniform(rng, 0.5, 20.0) * ray.direction;
    const Eigen::Vector2d back = project(cam, point);
    CHECK(std::abs(back.x() - u) < 1e-6);
    CHECK(std::abs(back.y() - v) < 1e-6);
  }
}

TEST_CASE("relative pose of a camera with itself is the identity") {
  std::mt19937_64 rng(3);
  const Camera cam =
      make_camera_at(64, 64, 100.0, {0.3, -0.2, 0.7}, random_rotation(rng, 0.5));
  const CameraPose rel = relative_pose(cam, cam);
  CHECK((rel.rotation - Eigen::Matrix3d::Identity()).norm() <
        1e-12);
  CHECK(rel.translation.norm() < 1e-12);
}

TEST_CASE("relative pose composes translations in the source frame") {
  const Camera src = make_camera_at(64, 64, 100.0, {0.0, 0.0, 0.0});
  const Camera tgt = make_camera_at(64, 64, 100.0, {1.0, 0.0, 0.0});
  const CameraPose rel = relative_pose(src, tgt);
  CHECK((rel.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  CHECK(rel.translation.x() == doctest::Approx(-1.0));
  CHECK(rel.translation.y() == doctest::Approx(0.0));
  CHECK(rel.translation.z() == doctest::Approx(0.0));
}

TEST_CASE("relative pose composes rotations") {
  const Eigen::Matrix3d ry90 =
      Eigen::AngleAxisd(M_PI / 2.0, Eigen::Vector3d::UnitY())
          .toRotationMatrix();
  Camera src = make_camera(64, 64);
  src.pose.rotation = ry90;
  const Camera tgt = make_camera(64, 64);
  const CameraPose rel = relative_pose(src, tgt);
  const Eigen::Matrix3d expected =
      Eigen::AngleAxisd(-M_PI / 2.0, Eigen::Vector3d::UnitY())
          .toRotationMatrix();
  CHECK((rel.rotation - expected).norm() < 1e-12);
}

TEST_CASE("pose validation rejects broken rotations") {
  CameraPose pose;
  pose.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(pose.validate(), DomainError);
  pose = CameraPose{};
  pose.rotation.col(0) = -pose.rotation.col(0);  // det -1 reflection
  CHECK_THROWS_AS(pose.validate(), DomainError);
}

TEST_CASE("intrinsics validation enforces the invariants") {
  CameraIntrinsics k{100.0, 100.0, 32.0, 32.0, 64, 64};
  CHECK_NOTHROW(k.validate());
  k.fx = 0.0;
  CHECK_THROWS_AS(k.validate(), DomainError);
  k.fx = 100.0;
  k.cx = 64.0;  // must be < width
  CHECK_THROWS_AS(k.validate(), DomainError);
}

TEST_CASE("homography of a camera with itself is the identity") {
  const Camera cam = make_camera_at(64, 64, 120.0, {0.4, 0.1, -0.3});
  for (double z : {0.5, 2.0, 1e6}) {
    const Eigen::Matrix3d h = plane_homography(cam, cam, z);
    CHECK((h - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("pure x-translation shifts content by f*t/z pixels") {
  const double f = 100.0, z = 2.0, tx = 0.1;
  const Camera src = make_camera(128, 128, f);
  const Camera tgt = make_camera_at(128, 128, f, {tx, 0.0, 0.0});
  const Eigen::Matrix3d h = plane_homography(src, tgt, z);
  const Eigen::Vector3d mapped = h * Eigen::Vector3d(40.0, 70.0, 1.0);
  CHECK(mapped.z() == doctest::Approx(1.0));
  CHECK(mapped.x() / mapped.z() ==
        doctest::Approx(40.0 + f * tx / z).epsilon(1e-12));
  CHECK(mapped.y() / mapped.z() == doctest::Approx(70.0).epsilon(1e-12));
}

TEST_CASE("homography approaches the identity at infinite depth") {
  const Camera src = make_camera(64, 64);
  const Camera tgt = make_camera_at(64, 64, 100.0, {0.3, -0.1, 0.0});
  // Parallax shrinks like f * |t| / z.
  const Eigen::Matrix3d far = plane_homography(src, tgt, 1e9);
  CHECK((far - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
  const Eigen::Matrix3d farther = plane_homography(src, tgt, 1e12);
  CHECK((farther - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
        (far - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
}

TEST_CASE("homography rejects invalid depths and degenerate planes") {
  const Camera src = make_camera(64, 64);
  CHECK_THROWS_AS(plane_homography(src, src, 0.0), DomainError);
  CHECK_THROWS_AS(plane_homography(src, src, -1.0), DomainError);
  // Target camera center sitting exactly on the plane.
  const Camera tgt = make_camera_at(64, 64, 100.0, {0.0, 0.0, 2.0});
  CHECK_THROWS_AS(plane_homography(src, tgt, 2.0), SingularityError);
}

// Full-projection consistency: for points on the plane, projecting through
// the two cameras must agree with the homography map.
TEST_CASE("homography agrees with direct projection on 1000 plane points") {
  std::mt19937_64 rng(17);
  int checked = 0;
  while (checked < 1000) {
    const Camera src = make_camera_at(
        128, 128, uniform(rng, 80.0, 150.0),
        Eigen::Vector3d(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3),
                        uniform(rng, -0.3, 0.3)),
        random_rotation(rng, 0.3));
    const Camera tgt = make_camera_at(
        128, 128, uniform(rng, 80.0, 150.0),
        Eigen::Vector3d(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3),
                        uniform(rng, -0.3, 0.3)),
        random_rotation(rng, 0.3));
    const double z = uniform(rng, 1.0, 5.0);
    const Eigen::Matrix3d h = plane_homography(src, tgt, z);

    for (int i = 0; i < 20; ++i) {
      // Point on the plane, in source camera coordinates, then world.
      const Eigen::Vector3d in_src(uniform(rng, -1.0, 1.0),
                                   uniform(rng, -1.0, 1.0), z);
      const Eigen::Vector3d world =
          src.pose.rotation.transpose() * (in_src - src.pose.translation);
      Eigen::Vector2d via_src, via_tgt;
      try {
        via_src = project(src, world);
        via_tgt = project(tgt, world);
      } catch (const DomainError&) {
        continue;  // behind one of the cameras
      }
      const Eigen::Vector3d mapped =
          h * Eigen::Vector3d(via_tgt.x(), via_tgt.y(), 1.0);
      REQUIRE(std::abs(mapped.z()) > 1e-9);
      CHECK(std::abs(mapped.x() / mapped.z() - via_src.x()) < 1e-6);
      CHECK(std::abs(mapped.y() / mapped.z() - via_src.y()) < 1e-6);
      ++checked;
    }
  }
}

// The depth argument names a plane in the first camera's frame, so the two
// directions describe one physical plane exactly when the cameras share a
// rotation and are offset laterally; then the two constructions must be
// mutual inverses.
TEST_CASE("forward and backward homographies invert each other") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Matrix3d shared = random_rotation(rng, 0.4);
    const Eigen::Vector3d base(uniform(rng, -0.3, 0.3),
                               uniform(rng, -0.3, 0.3),
                               uniform(rng, -0.3, 0.3));
    const Eigen::Vector3d lateral =
        shared.transpose() *
        Eigen::Vector3d(uniform(rng, -0.4, 0.4), uniform(rng, -0.4, 0.4), 0.0);
    const Camera src = make_camera_at(64, 64, 100.0, base, shared);
    const Camera tgt =
        make_camera_at(64, 64, uniform(rng, 90.0, 130.0), base + lateral,
                       shared);
    const double z = uniform(rng, 1.0, 4.0);
    Eigen::Matrix3d product =
        plane_homography(src, tgt, z) * plane_homography(tgt, src, z);
    REQUIRE(std::abs(product(2, 2)) > 1e-9);
    product /= product(2, 2);
    CHECK((product - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <
          1e-9);
  }
}

}  // TEST_SUITE
