#include "planefield/geometry.hpp"

#include <cmath>

namespace planefield {

namespace {

bool finite(const Eigen::Matrix3d& m) { return m.allFinite(); }

}  // namespace

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::inverse_matrix() const {
  Eigen::Matrix3d k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw DomainError("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw DomainError("camera dimensions must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw DomainError("principal point must lie inside the image");
  }
  if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) ||
      !std::isfinite(cy)) {
    throw DomainError("camera intrinsics must be finite");
  }
}

void CameraPose::validate() const {
  if (!finite(rotation) || !translation.allFinite()) {
    throw DomainError("camera pose must be finite");
  }
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw DomainError("camera rotation is not orthonormal");
  }
  if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
    throw DomainError("camera rotation must have determinant +1");
  }
}

void Camera::validate() const {
  intrinsics.validate();
  pose.validate();
}

Ray pixel_ray(const Camera& cam, double u, double v) {
  const CameraIntrinsics& k = cam.intrinsics;
  if (!(u >= 0.0 && u < k.width) || !(v >= 0.0 && v < k.height)) {
    throw DomainError("pixel coordinate outside the image");
  }
  const Eigen::Vector3d dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  const Eigen::Vector3d dir_world = cam.pose.rotation.transpose() * dir_cam;
  return Ray{cam.pose.center(), dir_world.normalized()};
}

CameraPose relative_pose(const Camera& src, const Camera& tgt) {
  CameraPose rel;
  rel.rotation = tgt.pose.rotation * src.pose.rotation.transpose();
  rel.translation = tgt.pose.translation - rel.rotation * src.pose.translation;
  return rel;
}

Eigen::Matrix3d plane_homography(const Camera& src, const Camera& tgt,
                                 double z) {
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw DomainError("plane depth must be positive");
  }
  if (src.intrinsics.fx == tgt.intrinsics.fx &&
      src.intrinsics.fy == tgt.intrinsics.fy &&
      src.intrinsics.cx == tgt.intrinsics.cx &&
      src.intrinsics.cy == tgt.intrinsics.cy &&
      src.pose.rotation == tgt.pose.rotation &&
      src.pose.translation == tgt.pose.translation) {
    return Eigen::Matrix3d::Identity();
  }

  // (R, t): target camera coordinates -> source camera coordinates. The
  // plane n.x = z (n = e_z, source frame) becomes m.x = z - n.t in the
  // target frame with m = R^T n, giving the exact induced map
  //   H = K_s (R + t m^T / (z - n.t)) K_t^{-1}.
  const CameraPose rel = relative_pose(tgt, src);
  const double denom = z - rel.translation.z();
  if (std::abs(denom) < 1e-12 * std::max(1.0, std::abs(z))) {
    throw SingularityError("plane passes through the target camera center");
  }
  const Eigen::Vector3d m = rel.rotation.row(2).transpose();
  const Eigen::Matrix3d mid =
      rel.rotation + rel.translation * m.transpose() / denom;
  Eigen::Matrix3d h = src.intrinsics.matrix() * mid *
                      tgt.intrinsics.inverse_matrix();
  if (!finite(h)) {
    throw SingularityError("homography is not finite");
  }
  if (std::abs(h(2, 2)) > 1e-300) {
    h /= h(2, 2);
  }
  return h;
}

Eigen::Vector2d project(const Camera& cam, const Eigen::Vector3d& world) {
  const Eigen::Vector3d p = cam.pose.rotation * world + cam.pose.translation;
  if (!(p.z() > 1e-12)) {
    throw DomainError("point is not in front of the camera");
  }
  const CameraIntrinsics& k = cam.intrinsics;
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

}  // namespace planefield
