#pragma once

// Serialization of library types: JSON for structured records, CSV for tables.

#include "widepose/fusion.hpp"
#include "widepose/simulator.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace widepose {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kLibraryVersion = "0.1.0";

using Json = nlohmann::json;

Json to_json(const Pose& pose);
Pose pose_from_json(const Json& j);

Json to_json(const CameraIntrinsics& K);
CameraIntrinsics intrinsics_from_json(const Json& j);

/// Objectness is stored densely per level; offsets only for cells where any
/// offset is non-zero.
Json to_json(const PyramidPrediction& pred);
PyramidPrediction prediction_from_json(const Json& j);

Json to_json(const Scene& scene);
Scene scene_from_json(const Json& j);

/// One line of `simulate` output.
Json simulation_record(const Scene& scene, const PyramidPrediction& pred);
std::pair<Scene, PyramidPrediction> simulation_record_from_json(const Json& j);

Json to_json(const PnpResult& result);
Json to_json(const FusionResult& result);

Json to_json(const Correspondence& c);
Correspondence correspondence_from_json(const Json& j);

/// Fixed formatting shared by every CSV writer: 17 significant digits,
/// "nan" for missing values.
std::string format_double(double x);

void write_benchmark_header(std::ostream& os);
void write_benchmark_rows(std::ostream& os, const std::vector<SceneEvaluation>& rows);
void write_summary_csv(std::ostream& os, const AccuracyTable& table);

struct PoseMetricsRow {
  std::uint64_t scene_id = 0;
  double depth_over_d = 0.0;
  double adi = 0.0;
  double add = 0.0;
  double e_q = 0.0;
  double e_t = 0.0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const PoseMetricsRow& row);

}  // namespace widepose
