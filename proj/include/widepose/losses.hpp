#pragma once

// Training losses with analytic gradients.
//
// The 3D regression loss measures, for every keypoint, the component of the
// ground-truth camera-frame point that is orthogonal to the ray through the
// predicted pixel. Unlike a pixel loss this distance does not shrink as the
// object moves away from the camera.

#include "widepose/geometry.hpp"
#include "widepose/grid.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace widepose {

enum class Reduction { kSum, kMean };

struct LossParams {
  double smooth_l1_beta = 0.1;  // 3D loss, model units
  double pixel_beta = 1.0;      // 2D baseline, pixels
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  bool componentwise = false;   // smooth-L1 per coordinate instead of on the norm
  Reduction reduction = Reduction::kSum;

  /// beta tied to the ADI accuracy scale: 0.1 * diameter.
  static LossParams for_diameter(double diameter);
  void validate() const;
};

inline constexpr double kProbabilityClamp = 1e-7;

double smooth_l1(double x, double beta);
double smooth_l1_derivative(double x, double beta);

/// v v^T / (v^T v). Throws kZeroRay when |v| <= 1e-12.
Mat3 ray_projection_matrix(const Vec3& v);

struct Loss3DResult {
  double value = 0.0;
  std::vector<Vec3> errors;    // e_i in the camera frame
  std::vector<Vec2> gradient;  // d value / d predicted_i, per pixel coordinate
};

Loss3DResult loss3d(const CameraIntrinsics& K, const Pose& gt_pose,
                    std::span<const Keypoint3D> keypoints, std::span<const Point2D> predicted,
                    const LossParams& params);

struct Loss2DResult {
  double value = 0.0;
  std::vector<Vec2> gradient;
};

Loss2DResult loss2d(std::span<const Point2D> gt_projections, std::span<const Point2D> predicted,
                    const LossParams& params);

struct FocalResult {
  double value = 0.0;
  double gradient = 0.0;  // d value / d prediction
};

FocalResult focal_loss(double prediction, bool target, const LossParams& params);

struct LevelLoss {
  double objectness = 0.0;
  double regression = 0.0;
};

/// Plain sum of both terms over all levels, accumulated in level order.
double total_loss(std::span<const LevelLoss> levels);

enum class RegressionLoss { k3D, k2D };

/// Per-level loss terms for one training instance: focal objectness on every
/// cell against mask membership, regression only on the sampled cells.
std::vector<LevelLoss> evaluate_level_losses(const PyramidPrediction& pred,
                                             const SegmentationMask& mask,
                                             const std::vector<std::vector<CellIndex>>& sampled,
                                             const CameraIntrinsics& K, const Pose& gt_pose,
                                             const KeypointArray3D& keypoints,
                                             const LossParams& params,
                                             RegressionLoss kind = RegressionLoss::k3D);

/// Analytic gradients against central finite differences over seeded
/// random configurations. Each entry is the worst per-configuration ratio
/// max|analytic - numeric| / max(|analytic|, |numeric|).
struct GradientCheckReport {
  int configurations = 0;
  double step = 0.0;
  double loss3d_max_rel_err = 0.0;
  double loss2d_max_rel_err = 0.0;
  double focal_max_rel_err = 0.0;

  bool passed(double tolerance = 1e-4) const;
};

GradientCheckReport gradient_check(int configurations, std::uint64_t seed, double step = 1e-5);

}  // namespace widepose
