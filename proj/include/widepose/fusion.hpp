#pragma once

// Inference-time fusion of keypoint predictions from every pyramid level.
//
// The most confident cell fixes the object size S; S sets how many cells each
// level contributes (the same softmax budget used for training); the chosen
// cells' keypoint predictions are pooled into one correspondence set and
// solved with RANSAC + PnP.

#include "widepose/error.hpp"
#include "widepose/grid.hpp"
#include "widepose/pnp.hpp"
#include "widepose/sampling.hpp"

#include <optional>
#include <vector>

namespace widepose {

enum class SizeMode {
  kArgmax,    // corners of the single most confident cell
  kAveraged,  // mean size over every cell above the threshold
};

enum class CountMode {
  kRounded,     // floor(N_k + 0.5)
  kStochastic,  // unbiased random rounding, seeded from the RANSAC seed
};

struct FusionParams {
  double objectness_threshold = 0.3;
  // alpha and lambda are used; reference sizes come from the pyramid spec.
  SamplingParams sampling;
  RansacParams ransac;
  SizeMode size_mode = SizeMode::kArgmax;
  CountMode count_mode = CountMode::kRounded;
  bool objectness_weights = false;  // weight correspondences by objectness in PnP

  void validate() const;
};

struct SizeEstimate {
  double size = 0.0;  // pixels
  std::size_t level = 0;
  CellIndex cell;
  double objectness = 0.0;
};

/// max(width, height) of the decoded corners of the most confident cell.
/// Throws kNoDetection when no cell reaches the threshold.
SizeEstimate estimate_size(const PyramidPrediction& pred, const FusionParams& params);

/// Bounding-box extent of eight decoded corners.
double keypoint_extent(const KeypointArray2D& corners);

struct GatheredCorrespondences {
  std::vector<Correspondence> correspondences;
  std::vector<std::vector<CellIndex>> cells;  // per level, by descending objectness
  std::vector<double> expected_counts;        // N_k
  std::vector<std::size_t> counts;            // n_k before clamping to available cells
};

/// Top-n_k cells per level among those at or above the threshold, each
/// contributing one correspondence per keypoint.
GatheredCorrespondences gather_correspondences(const PyramidPrediction& pred, double object_size,
                                               const KeypointArray3D& keypoints,
                                               const FusionParams& params);

struct LevelDiagnostic {
  int level_index = 0;
  std::optional<PnpResult> result;
  std::optional<ErrorCode> failure;
};

struct FusionResult {
  PnpResult pose;
  SizeEstimate anchor;
  GatheredCorrespondences gathered;
  std::vector<LevelDiagnostic> per_level;
};

/// Fused estimate only.
FusionResult fuse_pose(const PyramidPrediction& pred, const KeypointArray3D& keypoints,
                       const CameraIntrinsics& K, const FusionParams& params);

/// The same pipeline restricted to one level (which then receives the whole
/// sample budget). Never throws domain errors; failures are recorded.
LevelDiagnostic level_pose(const PyramidPrediction& pred, std::size_t level,
                           const KeypointArray3D& keypoints, const CameraIntrinsics& K,
                           const FusionParams& params);

/// Fused estimate plus per-level standalone diagnostics.
FusionResult fuse(const PyramidPrediction& pred, const KeypointArray3D& keypoints,
                  const CameraIntrinsics& K, const FusionParams& params);

}  // namespace widepose
