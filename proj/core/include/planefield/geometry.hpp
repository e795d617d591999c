#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "planefield/errors.hpp"

namespace planefield {

/// Pinhole intrinsics. Image coordinates are continuous: the center of
/// integer pixel (i, j) is the point (i + 0.5, j + 0.5).
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Eigen::Matrix3d matrix() const;
  Eigen::Matrix3d inverse_matrix() const;
  void validate() const;  // throws DomainError
};

/// Rigid pose mapping world coordinates to camera coordinates:
/// x_cam = R * x_world + t.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static CameraPose identity() { return {}; }

  /// Camera center in world coordinates, -R^T t.
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  void validate() const;  // orthonormal within 1e-9, det +1
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraPose pose;

  void validate() const;
};

/// World-space ray with unit direction.
struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d direction;
};

/// Back-projects the continuous image point (u, v) of `cam` into a world
/// ray through the camera center. Throws DomainError when (u, v) falls
/// outside [0, width) x [0, height).
Ray pixel_ray(const Camera& cam, double u, double v);

/// Rigid transform taking source-camera coordinates to target-camera
/// coordinates: x_tgt = R * x_src + t.
CameraPose relative_pose(const Camera& src, const Camera& tgt);

/// Homography mapping target-image homogeneous pixel coordinates to
/// source-image pixel coordinates for the fronto-parallel source plane at
/// depth z (normal (0,0,1) in the source camera frame):
///
///   H = K_s (R + t m^T / (z - n.t)) K_t^{-1},   m = R^T n,
///
/// with (R, t) the target-to-source relative pose. Normalized so that
/// H(2,2) = 1 when nonzero. Throws DomainError for z <= 0 and
/// SingularityError when the plane passes through the target camera center.
Eigen::Matrix3d plane_homography(const Camera& src, const Camera& tgt,
                                 double z);

/// Projects a world point into continuous image coordinates. Throws
/// DomainError when the point is not strictly in front of the camera.
Eigen::Vector2d project(const Camera& cam, const Eigen::Vector3d& world);

}  // namespace planefield
