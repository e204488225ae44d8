#pragma once

// Pose from 3D-to-2D correspondences: linear DLT initialization, damped
// Gauss-Newton refinement of the pixel reprojection error, and a seeded
// RANSAC wrapper.

#include "widepose/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace widepose {

struct Correspondence {
  Keypoint3D model = Keypoint3D::Zero();
  Point2D image = Point2D::Zero();
  double weight = 1.0;
};

struct RansacParams {
  int max_iterations = 200;
  double inlier_threshold_px = 5.0;
  int min_sample_size = 4;
  double confidence = 0.99;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RefineOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;
};

struct RefineResult {
  Pose pose;
  int iterations = 0;       // accepted steps
  bool converged = false;   // false: max_iterations hit, pose is best-so-far
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

struct PnpResult {
  Pose pose;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  double mean_reprojection_error_px = 0.0;  // over inliers
  int hypotheses = 0;                       // RANSAC iterations run
};

/// Pixel distance between the projection of c.model and c.image; +inf when
/// the point falls behind the camera.
double reprojection_error(const CameraIntrinsics& K, const Pose& pose, const Correspondence& c);

/// Weighted sum of squared pixel residuals; +inf if any point is behind the camera.
double reprojection_cost(const CameraIntrinsics& K, const Pose& pose,
                         std::span<const Correspondence> corrs);

/// Linear estimate from >= 6 correspondences, rotation snapped to SO(3).
/// Throws kDegenerateConfiguration for collinear image points, too few
/// points, or a design matrix with condition number above 1e12.
Pose pnp_dlt(std::span<const Correspondence> corrs, const CameraIntrinsics& K);

/// Levenberg-damped Gauss-Newton over a left-multiplied rotation vector and
/// an additive translation. Throws kNonPositiveDepth if the initial pose puts
/// a model point behind the camera.
RefineResult pnp_refine(const Pose& initial, std::span<const Correspondence> corrs,
                        const CameraIntrinsics& K, const RefineOptions& options = {});

/// DLT followed by refinement on all correspondences.
Pose solve_pnp(std::span<const Correspondence> corrs, const CameraIntrinsics& K);

/// Robust pose. Deterministic for a given seed; on equal inlier counts the
/// earliest hypothesis is kept. Throws kNoConsensus when no hypothesis
/// gathers min_sample_size inliers.
PnpResult pnp_ransac(std::span<const Correspondence> corrs, const CameraIntrinsics& K,
                     const RansacParams& params);

}  // namespace widepose
