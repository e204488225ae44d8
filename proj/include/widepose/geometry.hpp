#pragma once

// Pose algebra and the pinhole camera model.
//
// Image coordinates are continuous: u grows rightward, v downward, and the
// top-left corner of the image is (0, 0), so pixel (col, row) covers
// [col, col + 1) x [row, row + 1) and its center sits at (col + 0.5, row + 0.5).
// Metric results do not depend on this choice as long as K is expressed in
// the same frame.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <random>

namespace widepose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

using Point2D = Vec2;
using Keypoint3D = Vec3;

/// Points closer to the camera plane than this are rejected by project().
inline constexpr double kDepthEpsilon = 1e-12;

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws kInvalidArgument unless fx, fy are finite and positive.
  void validate() const;

  Mat3 matrix() const;
  Mat3 inverse_matrix() const;

  /// Square-pixel camera with the principal point at the image center.
  static CameraIntrinsics from_fov(double horizontal_fov_deg, int width, int height);
};

/// Rigid transform x_cam = R * x_model + t. The rotation is held as a unit
/// quaternion and expanded to a matrix on demand.
class Pose {
 public:
  Pose() = default;
  Pose(const Eigen::Quaterniond& rotation, const Vec3& translation);

  /// Builds a pose from a possibly non-orthonormal matrix; the columns are
  /// re-orthonormalized with Gram-Schmidt before conversion.
  static Pose from_matrix(const Mat3& rotation, const Vec3& translation);
  static Pose identity() { return Pose(); }

  const Eigen::Quaterniond& quaternion() const { return rotation_; }
  Mat3 rotation() const { return rotation_.toRotationMatrix(); }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }

  /// (this * other)(x) = this(other(x)).
  Pose compose(const Pose& other) const;
  Pose inverse() const;

 private:
  Eigen::Quaterniond rotation_ = Eigen::Quaterniond::Identity();
  Vec3 translation_ = Vec3::Zero();
};

inline Pose operator*(const Pose& a, const Pose& b) { return a.compose(b); }

Vec3 transform_to_camera(const Pose& pose, const Keypoint3D& p);

/// Pinhole projection of a model point. Throws kNonPositiveDepth when the
/// camera-frame depth is <= kDepthEpsilon.
Point2D project(const CameraIntrinsics& K, const Pose& pose, const Keypoint3D& p);

/// Projection of a point already expressed in the camera frame.
Point2D project_camera_point(const CameraIntrinsics& K, const Vec3& xc);

/// K^-1 [u, v, 1]^T, i.e. the ray with unit z component through u.
Vec3 backproject_ray(const CameraIntrinsics& K, const Point2D& u);

// SO(3) helpers. Rotation vectors are axis * angle in radians.
Mat3 gram_schmidt(const Mat3& m);
Mat3 rotation_from_vector(const Vec3& rotvec);
Vec3 rotation_to_vector(const Mat3& r);
Eigen::Quaterniond quaternion_from_wxyz(double w, double x, double y, double z);
Vec4 quaternion_to_wxyz(const Eigen::Quaterniond& q);
Mat3 skew(const Vec3& v);

/// Geodesic angle between two rotations, in radians.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Uniform rotation on SO(3): a normalized 4D Gaussian read as a quaternion.
Eigen::Quaterniond random_rotation(std::mt19937_64& rng);

}  // namespace widepose
