#include "widepose/io.hpp"

#include "widepose/error.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace widepose {

namespace {

Json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <int N>
Eigen::Matrix<double, N, 1> vec_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N)) {
    throw Error(ErrorCode::kInvalidArgument, std::string("expected ") + std::to_string(N) +
                                                 " numbers for " + what);
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = j.at(i).get<double>();
  return v;
}

// Wraps lookups so malformed input surfaces as a library error.
template <typename F>
auto parsed(const char* what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

Json to_json(const Pose& pose) {
  return {{"q_wxyz", vec_json(quaternion_to_wxyz(pose.quaternion()))},
          {"t_xyz", vec_json(pose.translation())}};
}

Pose pose_from_json(const Json& j) {
  return parsed("pose", [&] {
    const Vec4 q = vec_from_json<4>(j.at("q_wxyz"), "q_wxyz");
    return Pose(quaternion_from_wxyz(q[0], q[1], q[2], q[3]), vec_from_json<3>(j.at("t_xyz"), "t_xyz"));
  });
}

Json to_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}};
}

CameraIntrinsics intrinsics_from_json(const Json& j) {
  return parsed("intrinsics", [&] {
    CameraIntrinsics K{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                       j.at("cy").get<double>()};
    K.validate();
    return K;
  });
}

Json to_json(const PyramidPrediction& pred) {
  const auto& spec = pred.spec();
  Json levels = Json::array();
  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    const auto cells = pred.level(k);
    Json objectness = Json::array();
    Json offsets = Json::array();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      objectness.push_back(cells[i].objectness);
      bool any = false;
      for (const auto& o : cells[i].offsets) any = any || o.x() != 0.0 || o.y() != 0.0;
      if (!any) continue;
      Json row = Json::array({i});
      for (const auto& o : cells[i].offsets) {
        row.push_back(o.x());
        row.push_back(o.y());
      }
      offsets.push_back(std::move(row));
    }
    levels.push_back({{"index", spec.levels[k].index},
                      {"stride", spec.levels[k].stride},
                      {"reference_size", spec.levels[k].reference_size},
                      {"objectness", std::move(objectness)},
                      {"offsets", std::move(offsets)}});
  }
  return {{"width", spec.width}, {"height", spec.height}, {"levels", std::move(levels)}};
}

PyramidPrediction prediction_from_json(const Json& j) {
  return parsed("prediction", [&] {
    PyramidSpec spec;
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    for (const auto& lv : j.at("levels")) {
      spec.levels.push_back({lv.at("index").get<int>(), lv.at("stride").get<int>(),
                             lv.at("reference_size").get<double>()});
    }
    spec.validate();
    PyramidPrediction pred(spec);
    for (std::size_t k = 0; k < spec.num_levels(); ++k) {
      const Json& lv = j.at("levels").at(k);
      auto cells = pred.level(k);
      const Json& obj = lv.at("objectness");
      if (obj.size() != cells.size()) {
        throw Error(ErrorCode::kInvalidArgument, "objectness array does not match the level grid");
      }
      for (std::size_t i = 0; i < cells.size(); ++i) cells[i].objectness = obj[i].get<double>();
      for (const auto& row : lv.at("offsets")) {
        if (row.size() != 1 + 2 * kNumKeypoints) {
          throw Error(ErrorCode::kInvalidArgument, "offset row must hold a cell index and 16 values");
        }
        const auto i = row[0].get<std::size_t>();
        if (i >= cells.size()) throw Error(ErrorCode::kOutOfBounds, "offset cell index out of range");
        for (std::size_t p = 0; p < kNumKeypoints; ++p) {
          cells[i].offsets[p] = Vec2(row[1 + 2 * p].get<double>(), row[2 + 2 * p].get<double>());
        }
      }
    }
    return pred;
  });
}

Json to_json(const Scene& scene) {
  Json keypoints = Json::array();
  for (const auto& p : scene.keypoints) keypoints.push_back(vec_json(p));
  Json points = Json::array();
  for (const auto& p : scene.cloud->points()) points.push_back(vec_json(p));
  return {{"id", scene.id},
          {"seed", scene.seed},
          {"K", to_json(scene.K)},
          {"gt_pose", to_json(scene.gt_pose)},
          {"keypoints", std::move(keypoints)},
          {"model_points", std::move(points)},
          {"projected_size", scene.projected_size},
          {"depth_over_d", scene.depth_over_d}};
}

Scene scene_from_json(const Json& j) {
  return parsed("scene", [&] {
    Scene s;
    s.id = j.at("id").get<std::uint64_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.K = intrinsics_from_json(j.at("K"));
    s.gt_pose = pose_from_json(j.at("gt_pose"));
    const Json& kp = j.at("keypoints");
    if (kp.size() != kNumKeypoints) throw Error(ErrorCode::kInvalidArgument, "scene needs 8 keypoints");
    for (std::size_t i = 0; i < kNumKeypoints; ++i) s.keypoints[i] = vec_from_json<3>(kp[i], "keypoint");
    std::vector<Vec3> points;
    for (const auto& p : j.at("model_points")) points.push_back(vec_from_json<3>(p, "model point"));
    s.cloud = std::make_shared<const ModelCloud>(std::move(points));
    s.projected_size = j.at("projected_size").get<double>();
    s.depth_over_d = j.at("depth_over_d").get<double>();
    return s;
  });
}

Json simulation_record(const Scene& scene, const PyramidPrediction& pred) {
  return {{"schema_version", kSchemaVersion}, {"scene", to_json(scene)}, {"prediction", to_json(pred)}};
}

std::pair<Scene, PyramidPrediction> simulation_record_from_json(const Json& j) {
  const int version = parsed("record", [&] { return j.at("schema_version").get<int>(); });
  if (version != kSchemaVersion) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported schema_version " + std::to_string(version));
  }
  return {scene_from_json(j.at("scene")), prediction_from_json(j.at("prediction"))};
}

Json to_json(const PnpResult& result) {
  return {{"pose", to_json(result.pose)},
          {"inlier_count", result.inlier_count},
          {"correspondences", result.inliers.size()},
          {"mean_reprojection_error_px", result.mean_reprojection_error_px},
          {"hypotheses", result.hypotheses}};
}

Json to_json(const FusionResult& result) {
  Json cells = Json::array();
  for (const auto& level : result.gathered.cells) cells.push_back(level.size());
  Json per_level = Json::array();
  for (const auto& d : result.per_level) {
    Json entry = {{"level", d.level_index}};
    if (d.result) entry["result"] = to_json(*d.result);
    if (d.failure) entry["failure"] = to_string(*d.failure);
    per_level.push_back(std::move(entry));
  }
  return {{"pose", to_json(result.pose)},
          {"anchor",
           {{"size", result.anchor.size},
            {"level", result.anchor.level},
            {"row", result.anchor.cell.row},
            {"col", result.anchor.cell.col},
            {"objectness", result.anchor.objectness}}},
          {"expected_counts", result.gathered.expected_counts},
          {"counts", result.gathered.counts},
          {"cells_used", std::move(cells)},
          {"per_level", std::move(per_level)}};
}

Json to_json(const Correspondence& c) {
  return {{"model", vec_json(c.model)}, {"image", vec_json(c.image)}, {"weight", c.weight}};
}

Correspondence correspondence_from_json(const Json& j) {
  return parsed("correspondence", [&] {
    Correspondence c;
    c.model = vec_from_json<3>(j.at("model"), "model");
    c.image = vec_from_json<2>(j.at("image"), "image");
    c.weight = j.value("weight", 1.0);
    return c;
  });
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_benchmark_header(std::ostream& os) {
  os << "scene_id,depth_band,method,adi_error,success\n";
}

void write_benchmark_rows(std::ostream& os, const std::vector<SceneEvaluation>& rows) {
  for (const auto& row : rows) {
    for (const auto& m : row.methods) {
      os << row.scene_id << ',' << (row.band.empty() ? "none" : row.band) << ',' << m.method << ','
         << format_double(m.adi_error) << ',' << (m.success ? 1 : 0) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, const AccuracyTable& table) {
  os << "method";
  for (const auto& b : table.bands) os << ',' << b;
  os << '\n';
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    os << table.methods[m];
    for (std::size_t b = 0; b < table.bands.size(); ++b) os << ',' << format_double(table.value[m][b]);
    os << '\n';
  }
}

void write_metrics_header(std::ostream& os) { os << "scene_id,depth_over_d,adi,add,e_q,e_t\n"; }

void write_metrics_row(std::ostream& os, const PoseMetricsRow& row) {
  os << row.scene_id << ',' << format_double(row.depth_over_d) << ',' << format_double(row.adi) << ','
     << format_double(row.add) << ',' << format_double(row.e_q) << ',' << format_double(row.e_t) << '\n';
}

}  // namespace widepose
