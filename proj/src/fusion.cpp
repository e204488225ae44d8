#include "widepose/fusion.hpp"

#include "widepose/error.hpp"

#include <algorithm>
#include <numeric>

namespace widepose {

void FusionParams::validate() const {
  if (!(objectness_threshold > 0.0 && objectness_threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "objectness threshold must lie in (0, 1)");
  }
  sampling.validate();
  ransac.validate();
}

double keypoint_extent(const KeypointArray2D& corners) {
  Vec2 lo = corners[0], hi = corners[0];
  for (const auto& c : corners) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  return (hi - lo).maxCoeff();
}

SizeEstimate estimate_size(const PyramidPrediction& pred, const FusionParams& params) {
  const auto& spec = pred.spec();
  const double tau = params.objectness_threshold;
  std::optional<SizeEstimate> best;
  double size_sum = 0.0;
  std::size_t confident = 0;
  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    const auto cells = pred.level(k);
    const int cols = spec.cols(k);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double obj = cells[i].objectness;
      if (!(obj >= tau)) continue;
      const CellIndex cell{static_cast<int>(i / cols), static_cast<int>(i % cols)};
      if (params.size_mode == SizeMode::kAveraged) {
        size_sum += keypoint_extent(decode_keypoints(spec, k, cell, cells[i]));
        ++confident;
      }
      if (!best || obj > best->objectness) best = SizeEstimate{0.0, k, cell, obj};
    }
  }
  if (!best) throw Error(ErrorCode::kNoDetection, "no cell reaches the objectness threshold");

  best->size = params.size_mode == SizeMode::kAveraged
                   ? size_sum / static_cast<double>(confident)
                   : keypoint_extent(decode_keypoints(spec, best->level, best->cell,
                                                      pred.at(best->level, best->cell)));
  if (!(best->size > 0.0)) {
    throw Error(ErrorCode::kNoDetection, "most confident cell predicts a degenerate box");
  }
  return *best;
}

GatheredCorrespondences gather_correspondences(const PyramidPrediction& pred, double object_size,
                                               const KeypointArray3D& keypoints,
                                               const FusionParams& params) {
  const auto& spec = pred.spec();
  SamplingParams sampling = params.sampling;
  sampling.reference_sizes = spec.reference_sizes();

  GatheredCorrespondences out;
  out.expected_counts = sample_counts(object_size, sampling).expected;
  out.counts = params.count_mode == CountMode::kRounded
                   ? realize_counts_rounded(out.expected_counts)
                   : realize_counts(out.expected_counts, params.ransac.seed);
  out.cells.resize(spec.num_levels());

  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    if (out.counts[k] == 0) continue;
    const auto cells = pred.level(k);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].objectness >= params.objectness_threshold) candidates.push_back(i);
    }
    const std::size_t take = std::min(out.counts[k], candidates.size());
    // Highest objectness first; row-major order breaks ties.
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(), [&](std::size_t a, std::size_t b) {
                        if (cells[a].objectness != cells[b].objectness) {
                          return cells[a].objectness > cells[b].objectness;
                        }
                        return a < b;
                      });
    const int cols = spec.cols(k);
    for (std::size_t j = 0; j < take; ++j) {
      const CellIndex cell{static_cast<int>(candidates[j] / cols),
                           static_cast<int>(candidates[j] % cols)};
      out.cells[k].push_back(cell);
      const CellPrediction& cp = cells[candidates[j]];
      const KeypointArray2D decoded = decode_keypoints(spec, k, cell, cp);
      for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        out.correspondences.push_back(
            {keypoints[i], decoded[i], params.objectness_weights ? cp.objectness : 1.0});
      }
    }
  }
  return out;
}

FusionResult fuse_pose(const PyramidPrediction& pred, const KeypointArray3D& keypoints,
                       const CameraIntrinsics& K, const FusionParams& params) {
  params.validate();
  FusionResult out;
  out.anchor = estimate_size(pred, params);
  out.gathered = gather_correspondences(pred, out.anchor.size, keypoints, params);
  out.pose = pnp_ransac(out.gathered.correspondences, K, params.ransac);
  return out;
}

LevelDiagnostic level_pose(const PyramidPrediction& pred, std::size_t level,
                           const KeypointArray3D& keypoints, const CameraIntrinsics& K,
                           const FusionParams& params) {
  LevelDiagnostic diag;
  diag.level_index = pred.spec().levels.at(level).index;
  try {
    diag.result = fuse_pose(pred.single_level(level), keypoints, K, params).pose;
  } catch (const Error& e) {
    diag.failure = e.code();
  }
  return diag;
}

FusionResult fuse(const PyramidPrediction& pred, const KeypointArray3D& keypoints,
                  const CameraIntrinsics& K, const FusionParams& params) {
  FusionResult out = fuse_pose(pred, keypoints, K, params);
  for (std::size_t k = 0; k < pred.spec().num_levels(); ++k) {
    out.per_level.push_back(level_pose(pred, k, keypoints, K, params));
  }
  return out;
}

}  // namespace widepose
