#include "widepose/geometry.hpp"

#include "widepose/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace widepose {

void CameraIntrinsics::validate() const {
  if (!(std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0) ||
      !std::isfinite(cx) || !std::isfinite(cy)) {
    throw Error(ErrorCode::kInvalidArgument, "camera focal lengths must be finite and positive");
  }
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 CameraIntrinsics::inverse_matrix() const {
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

CameraIntrinsics CameraIntrinsics::from_fov(double horizontal_fov_deg, int width, int height) {
  if (!(horizontal_fov_deg > 0.0 && horizontal_fov_deg < 180.0) || width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "field of view must lie in (0, 180) degrees");
  }
  const double half = 0.5 * horizontal_fov_deg * std::numbers::pi / 180.0;
  const double f = 0.5 * width / std::tan(half);
  return {f, f, 0.5 * width, 0.5 * height};
}

namespace {

// Unit quaternions pass through untouched, so serialized poses reload
// bit-identically.
Eigen::Quaterniond unit_quaternion(const Eigen::Quaterniond& q) {
  if (std::abs(q.squaredNorm() - 1.0) <= 8.0 * std::numeric_limits<double>::epsilon()) return q;
  return q.normalized();
}

}  // namespace

Pose::Pose(const Eigen::Quaterniond& rotation, const Vec3& translation)
    : rotation_(unit_quaternion(rotation)), translation_(translation) {}

Pose Pose::from_matrix(const Mat3& rotation, const Vec3& translation) {
  return Pose(Eigen::Quaterniond(gram_schmidt(rotation)), translation);
}

Pose Pose::compose(const Pose& other) const {
  return Pose(rotation_ * other.rotation_, rotation_ * other.translation_ + translation_);
}

Pose Pose::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return Pose(inv, -(inv * translation_));
}

Vec3 transform_to_camera(const Pose& pose, const Keypoint3D& p) { return pose.apply(p); }

Point2D project_camera_point(const CameraIntrinsics& K, const Vec3& xc) {
  if (!(xc.z() > kDepthEpsilon)) {
    throw Error(ErrorCode::kNonPositiveDepth, "point is behind or on the camera plane");
  }
  return {K.fx * xc.x() / xc.z() + K.cx, K.fy * xc.y() / xc.z() + K.cy};
}

Point2D project(const CameraIntrinsics& K, const Pose& pose, const Keypoint3D& p) {
  return project_camera_point(K, pose.apply(p));
}

Vec3 backproject_ray(const CameraIntrinsics& K, const Point2D& u) {
  return {(u.x() - K.cx) / K.fx, (u.y() - K.cy) / K.fy, 1.0};
}

Mat3 gram_schmidt(const Mat3& m) {
  Vec3 c0 = m.col(0).normalized();
  Vec3 c1 = m.col(1) - c0.dot(m.col(1)) * c0;
  c1.normalize();
  // Third column from the cross product keeps det = +1 regardless of input handedness.
  Mat3 r;
  r.col(0) = c0;
  r.col(1) = c1;
  r.col(2) = c0.cross(c1);
  return r;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Mat3 rotation_from_vector(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-12) {
    return Mat3::Identity() + skew(rotvec);
  }
  return Eigen::AngleAxisd(angle, rotvec / angle).toRotationMatrix();
}

Vec3 rotation_to_vector(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

Eigen::Quaterniond quaternion_from_wxyz(double w, double x, double y, double z) {
  Eigen::Quaterniond q(w, x, y, z);
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::kInvalidArgument, "quaternion must be finite and non-zero");
  }
  return unit_quaternion(q);
}

Vec4 quaternion_to_wxyz(const Eigen::Quaterniond& q) { return {q.w(), q.x(), q.y(), q.z()}; }

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = 0.5 * ((a.transpose() * b).trace() - 1.0);
  // acos loses precision near zero; the quaternion form stays accurate there.
  if (c > 0.99) {
    const Eigen::Quaterniond q(a.transpose() * b);
    return 2.0 * std::atan2(q.vec().norm(), std::abs(q.w()));
  }
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Eigen::Quaterniond random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (;;) {
    const double w = gauss(rng), x = gauss(rng), y = gauss(rng), z = gauss(rng);
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n > 1e-9) {
      return Eigen::Quaterniond(w / n, x / n, y / n, z / n);
    }
  }
}

}  // namespace widepose
