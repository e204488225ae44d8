#include "widepose/error.hpp"
#include "widepose/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace widepose {
namespace {

const PyramidSpec kSpec = PyramidSpec::standard();

std::pair<Scene, PyramidPrediction> sample() {
  SimulationSetup setup;
  return simulate_scene(setup, 5, 17);
}

TEST(Json, PoseRoundTripIsExact) {
  const Pose p(Eigen::Quaterniond(rotation_from_vector(Vec3(0.3, -1.2, 0.7))), Vec3(0.1, 1e-17, 5.25));
  const Pose back = pose_from_json(Json::parse(to_json(p).dump()));
  EXPECT_EQ(back.quaternion().coeffs(), p.quaternion().coeffs());
  EXPECT_EQ(back.translation(), p.translation());
}

TEST(Json, IntrinsicsRoundTrip) {
  const auto K = CameraIntrinsics::from_fov(100, 640, 480);
  const auto back = intrinsics_from_json(Json::parse(to_json(K).dump()));
  EXPECT_EQ(back.fx, K.fx);
  EXPECT_EQ(back.fy, K.fy);
  EXPECT_EQ(back.cx, K.cx);
  EXPECT_EQ(back.cy, K.cy);
  EXPECT_THROW(intrinsics_from_json(Json::parse(R"({"fx": 1})")), Error);
}

TEST(Json, PredictionRoundTripIsExact) {
  const auto [scene, pred] = sample();
  const auto back = prediction_from_json(Json::parse(to_json(pred).dump()));
  ASSERT_EQ(back.spec().num_levels(), kSpec.num_levels());
  for (std::size_t k = 0; k < kSpec.num_levels(); ++k) {
    for (std::size_t i = 0; i < kSpec.cell_count(k); ++i) {
      EXPECT_EQ(back.level(k)[i].objectness, pred.level(k)[i].objectness);
      EXPECT_EQ(back.level(k)[i].offsets, pred.level(k)[i].offsets);
    }
  }
}

TEST(Json, MalformedPredictionRejected) {
  Json j = to_json(PyramidPrediction(kSpec));
  j["levels"][0]["objectness"].erase(0);
  EXPECT_THROW(prediction_from_json(j), Error);
}

TEST(Json, SceneRoundTrip) {
  const auto [scene, pred] = sample();
  const Scene back = scene_from_json(Json::parse(to_json(scene).dump()));
  EXPECT_EQ(back.id, scene.id);
  EXPECT_EQ(back.seed, scene.seed);
  EXPECT_EQ(back.projected_size, scene.projected_size);
  EXPECT_EQ(back.depth_over_d, scene.depth_over_d);
  EXPECT_EQ(back.keypoints, scene.keypoints);
  EXPECT_EQ(back.cloud->points(), scene.cloud->points());
  EXPECT_EQ(to_json(back).dump(), to_json(scene).dump());
}

TEST(Json, SimulationRecordChecksVersion) {
  const auto [scene, pred] = sample();
  Json rec = simulation_record(scene, pred);
  EXPECT_EQ(rec["schema_version"], kSchemaVersion);
  const auto [s2, p2] = simulation_record_from_json(rec);
  EXPECT_EQ(to_json(p2).dump(), to_json(pred).dump());
  rec["schema_version"] = kSchemaVersion + 1;
  EXPECT_THROW(simulation_record_from_json(rec), Error);
}

TEST(Json, CorrespondenceRoundTrip) {
  const Correspondence c{Vec3(0.1, -0.2, 0.3), Point2D(100.5, 7.25), 0.75};
  const Json j = to_json(c);
  EXPECT_EQ(j.dump(), R"({"image":[100.5,7.25],"model":[0.1,-0.2,0.3],"weight":0.75})");
  const auto back = correspondence_from_json(j);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.image, c.image);
  EXPECT_EQ(back.weight, c.weight);
  EXPECT_THROW(correspondence_from_json(Json::parse(R"({"model":[1,2],"image":[1,2]})")), Error);
}

TEST(Json, FusionResultHasDiagnostics) {
  const auto [scene, pred] = sample();
  const auto r = fuse(pred, scene.keypoints, scene.K, fusion_params_for_scene(FusionParams{}, scene));
  const Json j = to_json(r);
  EXPECT_TRUE(j.contains("pose"));
  EXPECT_EQ(j["per_level"].size(), kSpec.num_levels());
  EXPECT_EQ(j["anchor"]["size"].get<double>(), r.anchor.size);
}

TEST(Csv, FormatDouble) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(std::nan("")), "nan");
}

TEST(Csv, BenchmarkRowsHaveStableColumns) {
  std::ostringstream os;
  write_benchmark_header(os);
  SceneEvaluation e;
  e.scene_id = 4;
  e.band = "near";
  e.methods.push_back({"fused", 0.01, true, std::nullopt, std::nullopt});
  e.methods.push_back({"L1", std::nan(""), false, std::nullopt, ErrorCode::kNoDetection});
  write_benchmark_rows(os, {e});
  EXPECT_EQ(os.str(),
            "scene_id,depth_band,method,adi_error,success\n"
            "4,near,fused,0.01,1\n"
            "4,near,L1,nan,0\n");
}

TEST(Csv, MetricsRow) {
  std::ostringstream os;
  write_metrics_header(os);
  write_metrics_row(os, {3, 2.5, 0.01, 0.02, 0.5, 0.25});
  EXPECT_EQ(os.str(), "scene_id,depth_over_d,adi,add,e_q,e_t\n3,2.5,0.01,0.02,0.5,0.25\n");
}

}  // namespace
}  // namespace widepose
