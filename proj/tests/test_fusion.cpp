#include "widepose/error.hpp"
#include "widepose/fusion.hpp"
#include "widepose/simulator.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace widepose {
namespace {

const PyramidSpec kSpec = PyramidSpec::standard();

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

// Corners of a w x h box centered on the cell, in stride units.
void set_box(PyramidPrediction& pred, std::size_t level, CellIndex cell, double w, double h, double score) {
  auto& c = pred.at(level, cell);
  c.objectness = score;
  const double s = kSpec.levels[level].stride;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    c.offsets[i] = Vec2((i & 1 ? 0.5 : -0.5) * w / s, (i & 2 ? 0.5 : -0.5) * h / s);
  }
}

TEST(EstimateSize, MaxOfExtents) {
  PyramidPrediction pred(kSpec);
  set_box(pred, 2, {5, 5}, 64, 48, 0.9);
  set_box(pred, 0, {3, 3}, 200, 10, 0.5);
  const auto est = estimate_size(pred, FusionParams{});
  EXPECT_DOUBLE_EQ(est.size, 64.0);
  EXPECT_EQ(est.level, 2u);
  EXPECT_EQ(est.cell, (CellIndex{5, 5}));
  EXPECT_DOUBLE_EQ(est.objectness, 0.9);
}

TEST(EstimateSize, AveragedMode) {
  PyramidPrediction pred(kSpec);
  set_box(pred, 2, {5, 5}, 64, 48, 0.9);
  set_box(pred, 1, {9, 9}, 32, 8, 0.5);
  set_box(pred, 1, {1, 1}, 500, 8, 0.1);  // below threshold, ignored
  FusionParams p;
  p.size_mode = SizeMode::kAveraged;
  EXPECT_DOUBLE_EQ(estimate_size(pred, p).size, 48.0);
}

TEST(EstimateSize, NoDetectionBelowThreshold) {
  PyramidPrediction pred(kSpec);
  set_box(pred, 2, {5, 5}, 64, 48, 0.29);
  EXPECT_EQ(code_of([&] { estimate_size(pred, FusionParams{}); }), ErrorCode::kNoDetection);
}

TEST(EstimateSize, EarliestCellWinsTies) {
  PyramidPrediction pred(kSpec);
  set_box(pred, 3, {2, 2}, 100, 10, 0.8);
  set_box(pred, 1, {7, 7}, 40, 10, 0.8);
  set_box(pred, 1, {7, 3}, 20, 10, 0.8);
  const auto est = estimate_size(pred, FusionParams{});
  EXPECT_EQ(est.level, 1u);
  EXPECT_EQ(est.cell, (CellIndex{7, 3}));
}

TEST(KeypointExtent, Example) {
  KeypointArray2D c;
  c.fill(Point2D(10, 10));
  c[3] = Point2D(74, 58);
  EXPECT_DOUBLE_EQ(keypoint_extent(c), 64.0);
}

KeypointArray3D unit_keypoints() {
  return box_keypoints(default_model(1.0));
}

TEST(Gather, HardAssignmentUsesOneLevel) {
  PyramidPrediction pred(kSpec);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 4; ++c) set_box(pred, 2, {r, c}, 64, 64, 0.4 + 0.01 * (r * 4 + c));
  }
  for (int r = 0; r < 10; ++r) set_box(pred, 0, {r, 0}, 64, 64, 0.99);
  FusionParams p;
  p.sampling.lambda = 30.0;
  const auto g = gather_correspondences(pred, 64.0, unit_keypoints(), p);
  EXPECT_EQ(g.counts[2], 10u);
  EXPECT_EQ(g.cells[2].size(), 10u);
  for (std::size_t k : {0u, 1u, 3u, 4u}) EXPECT_TRUE(g.cells[k].empty());
  EXPECT_EQ(g.correspondences.size(), 80u);
  // Highest objectness first.
  EXPECT_EQ(g.cells[2].front(), (CellIndex{4, 3}));
}

TEST(Gather, ClampsToAvailableCells) {
  PyramidPrediction pred(kSpec);
  set_box(pred, 2, {1, 1}, 64, 64, 0.9);
  FusionParams p;
  p.sampling.lambda = 30.0;
  const auto g = gather_correspondences(pred, 64.0, unit_keypoints(), p);
  EXPECT_EQ(g.correspondences.size(), 8u);
  EXPECT_EQ(g.cells[2].size(), 1u);
}

TEST(Gather, CountingIdentityAndThreshold) {
  PyramidPrediction pred(kSpec);
  for (std::size_t k = 0; k < kSpec.num_levels(); ++k) {
    for (int c = 0; c < 3; ++c) set_box(pred, k, {0, c}, 50, 50, c == 2 ? 0.2 : 0.7);
  }
  FusionParams p;
  p.sampling.lambda = 0.0;  // two cells per level requested
  const auto g = gather_correspondences(pred, 50.0, unit_keypoints(), p);
  std::size_t used = 0;
  for (const auto& cells : g.cells) {
    EXPECT_EQ(cells.size(), 2u);
    for (const auto& c : cells) EXPECT_NE(c.col, 2);
    used += cells.size();
  }
  EXPECT_EQ(g.correspondences.size(), kNumKeypoints * used);
}

TEST(Fuse, NoiselessSceneRecoversPose) {
  const auto cloud = std::make_shared<const ModelCloud>(default_model(1.0));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Scene scene = generate_scene(ScenarioParams{}, cloud, s);
    const auto pred = synthesize_prediction(scene, kSpec, NoiseModel::noiseless(), s);
    const auto r = fuse(pred, scene.keypoints, scene.K, FusionParams{});
    EXPECT_LT(rotation_angle_between(r.pose.pose.rotation(), scene.gt_pose.rotation()), 1e-6);
    EXPECT_LT((r.pose.pose.translation() - scene.gt_pose.translation()).norm(), 1e-6 * scene.gt_pose.translation().norm());
    EXPECT_EQ(r.per_level.size(), kSpec.num_levels());
    EXPECT_NEAR(r.anchor.size, scene.projected_size, 1e-6);
  }
}

TEST(Fuse, EmptyPredictionIsNoDetection) {
  const PyramidPrediction pred(kSpec);
  EXPECT_EQ(code_of([&] { fuse_pose(pred, unit_keypoints(), CameraIntrinsics::from_fov(100, 512, 512), FusionParams{}); }),
            ErrorCode::kNoDetection);
  const auto diag = level_pose(pred, 0, unit_keypoints(), CameraIntrinsics::from_fov(100, 512, 512), FusionParams{});
  EXPECT_FALSE(diag.result.has_value());
  EXPECT_EQ(diag.failure, ErrorCode::kNoDetection);
}

TEST(Fuse, DeterministicUnderNoise) {
  const auto cloud = std::make_shared<const ModelCloud>(default_model(1.0));
  const Scene scene = generate_scene(ScenarioParams{}, cloud, 3);
  const auto pred = synthesize_prediction(scene, kSpec, NoiseModel{}, 3);
  FusionParams p;
  p.count_mode = CountMode::kStochastic;
  const auto a = fuse(pred, scene.keypoints, scene.K, p);
  const auto b = fuse(pred, scene.keypoints, scene.K, p);
  EXPECT_EQ(a.pose.inliers, b.pose.inliers);
  EXPECT_EQ(a.pose.pose.translation(), b.pose.pose.translation());
  EXPECT_EQ(a.gathered.counts, b.gathered.counts);
}

TEST(FusionParams, Validation) {
  FusionParams p;
  p.objectness_threshold = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p.objectness_threshold = 1.0;
  EXPECT_THROW(p.validate(), Error);
  p = FusionParams{};
  p.sampling.lambda = -1.0;
  EXPECT_THROW(p.validate(), Error);
}

}  // namespace
}  // namespace widepose
