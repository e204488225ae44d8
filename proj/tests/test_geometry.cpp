#include "widepose/error.hpp"
#include "widepose/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace widepose {
namespace {

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Pose(random_rotation(rng), Vec3(u(rng), u(rng), 3.0 + u(rng)));
}

TEST(Intrinsics, FromFovMatchesPinholeFormula) {
  const auto K = CameraIntrinsics::from_fov(100.0, 512, 512);
  // 256 / tan(50 deg), evaluated at 40 digits.
  EXPECT_NEAR(K.fx, 214.809505581384, 1e-9);
  EXPECT_DOUBLE_EQ(K.fx, K.fy);
  EXPECT_DOUBLE_EQ(K.cx, 256.0);
  EXPECT_DOUBLE_EQ(K.cy, 256.0);
}

TEST(Intrinsics, RejectsBadValues) {
  EXPECT_THROW(CameraIntrinsics::from_fov(0.0, 512, 512), Error);
  EXPECT_THROW(CameraIntrinsics::from_fov(180.0, 512, 512), Error);
  CameraIntrinsics K{-1.0, 1.0, 0.0, 0.0};
  EXPECT_THROW(K.validate(), Error);
}

TEST(Intrinsics, InverseMatrix) {
  const CameraIntrinsics K{500.0, 400.0, 320.0, 240.0};
  EXPECT_TRUE((K.matrix() * K.inverse_matrix()).isApprox(Mat3::Identity(), 1e-14));
}

TEST(Project, IdentityPoseOnAxisHitsPrincipalPoint) {
  const CameraIntrinsics K{500.0, 500.0, 320.0, 240.0};
  const Point2D u = project(K, Pose::identity(), Vec3(0.0, 0.0, 2.0));
  EXPECT_DOUBLE_EQ(u.x(), 320.0);
  EXPECT_DOUBLE_EQ(u.y(), 240.0);
  const Point2D w = project(K, Pose::identity(), Vec3(1.0, -0.5, 2.0));
  EXPECT_DOUBLE_EQ(w.x(), 570.0);
  EXPECT_DOUBLE_EQ(w.y(), 115.0);
}

TEST(Project, BehindCameraThrows) {
  const CameraIntrinsics K{500.0, 500.0, 320.0, 240.0};
  try {
    project(K, Pose::identity(), Vec3(0.0, 0.0, -1.0));
    FAIL() << "expected NonPositiveDepth";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveDepth);
  }
  EXPECT_THROW(project(K, Pose::identity(), Vec3(1.0, 1.0, 0.0)), Error);
}

TEST(Project, BackprojectionRoundTrip) {
  std::mt19937_64 rng(3);
  const auto K = CameraIntrinsics::from_fov(100.0, 512, 512);
  std::uniform_real_distribution<double> px(0.0, 512.0), depth(0.5, 20.0);
  for (int i = 0; i < 200; ++i) {
    const Point2D u(px(rng), px(rng));
    const double z = depth(rng);
    const Vec3 ray = backproject_ray(K, u);
    EXPECT_DOUBLE_EQ(ray.z(), 1.0);
    const Point2D back = project_camera_point(K, z * ray);
    EXPECT_NEAR((back - u).norm(), 0.0, 1e-9);
  }
}

TEST(Pose, ComposeAndInverse) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    const Pose a = random_pose(rng), b = random_pose(rng);
    const Vec3 p(0.3, -0.2, 0.7);
    EXPECT_NEAR(((a * b).apply(p) - a.apply(b.apply(p))).norm(), 0.0, 1e-12);
    const Pose id = a * a.inverse();
    EXPECT_NEAR(rotation_angle_between(id.rotation(), Mat3::Identity()), 0.0, 1e-12);
    EXPECT_NEAR(id.translation().norm(), 0.0, 1e-12);
  }
}

TEST(Pose, RotationStaysOrthonormal) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Mat3 R = random_pose(rng).rotation();
    EXPECT_TRUE((R.transpose() * R).isApprox(Mat3::Identity(), 1e-12));
    EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
  }
}

TEST(Pose, FromMatrixRepairsDrift) {
  Mat3 m = rotation_from_vector(Vec3(0.1, 0.2, 0.3));
  m(0, 1) += 1e-4;
  m(2, 2) *= 1.001;
  const Mat3 R = Pose::from_matrix(m, Vec3::Zero()).rotation();
  EXPECT_TRUE((R.transpose() * R).isApprox(Mat3::Identity(), 1e-12));
  EXPECT_NEAR(R.determinant(), 1.0, 1e-12);
}

TEST(Pose, UnitQuaternionIsKeptBitExact) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Quaterniond q = random_rotation(rng);
    const Pose p(q, Vec3::Zero());
    EXPECT_EQ(p.quaternion().coeffs(), q.coeffs());
  }
}

TEST(Rotation, VectorRoundTrip) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec3 v(u(rng), u(rng), u(rng));
    v *= 3.0 / std::max(1.0, v.norm());
    const Vec3 back = rotation_to_vector(rotation_from_vector(v));
    EXPECT_NEAR((back - v).norm(), 0.0, 1e-9);
  }
  EXPECT_TRUE(rotation_from_vector(Vec3::Zero()).isApprox(Mat3::Identity()));
}

TEST(Rotation, AngleBetween) {
  const Mat3 R = rotation_from_vector(Vec3(0.0, 0.0, 0.25));
  EXPECT_NEAR(rotation_angle_between(Mat3::Identity(), R), 0.25, 1e-14);
  const Mat3 S = rotation_from_vector(Vec3(0.0, 2.5, 0.0));
  EXPECT_NEAR(rotation_angle_between(Mat3::Identity(), S), 2.5, 1e-12);
  const Mat3 tiny = rotation_from_vector(Vec3(1e-9, 0.0, 0.0));
  EXPECT_NEAR(rotation_angle_between(Mat3::Identity(), tiny), 1e-9, 1e-20);
}

TEST(Rotation, SkewIsCrossProduct) {
  const Vec3 a(1.0, -2.0, 0.5), b(0.3, 0.1, -4.0);
  EXPECT_NEAR((skew(a) * b - a.cross(b)).norm(), 0.0, 1e-15);
}

TEST(Rotation, QuaternionWxyz) {
  const auto q = quaternion_from_wxyz(2.0, 0.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(q.w(), 1.0);
  EXPECT_THROW(quaternion_from_wxyz(0.0, 0.0, 0.0, 0.0), Error);
  const Vec4 v = quaternion_to_wxyz(Eigen::Quaterniond(0.5, 0.5, 0.5, 0.5));
  EXPECT_EQ(v, Vec4(0.5, 0.5, 0.5, 0.5));
}

// Under a uniform rotation distribution the rotation angle has density
// (1 - cos t) / pi on [0, pi], so E[t] = pi/2 + 2/pi.
TEST(Rotation, RandomRotationAngleMean) {
  std::mt19937_64 rng(17);
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    sum += rotation_angle_between(Mat3::Identity(), random_rotation(rng).toRotationMatrix());
  }
  const double expected = std::numbers::pi / 2.0 + 2.0 / std::numbers::pi;
  EXPECT_NEAR(sum / n, expected, 0.02);
}

}  // namespace
}  // namespace widepose
