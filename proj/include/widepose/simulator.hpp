#pragma once

// Wide-depth-range scenario simulator.
//
// Stands in for a trained network: it places a known object in front of a
// wide-angle camera and fills a PyramidPrediction with keypoint offsets and
// objectness scores drawn from an explicit generative model. The model makes
// each level most confident and most precise when the object's image size is
// close to the level's reference size; that affinity is an assumption of the
// harness, chosen so that per-level specialization and multi-level fusion can
// be exercised end to end.

#include "widepose/fusion.hpp"
#include "widepose/grid.hpp"
#include "widepose/metrics.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace widepose {

/// splitmix64-style mixing; used to derive independent per-scene streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

struct ScenarioParams {
  double fov_deg = 100.0;
  int width = 512;
  int height = 512;
  double depth_min = 1.0;  // multiples of the diameter
  double depth_max = 10.0;
  double diameter = 1.0;   // of the default cube model
  bool allow_truncation = false;

  void validate() const;
};

struct NoiseModel {
  double sigma_strides = 0.15;          // per-coordinate offset noise at a matched level
  std::vector<double> level_sigma;      // optional per-level override of sigma_strides
  double scale_mismatch_gain = 1.0;     // sigma grows by (1 + gain * delta^2)
  double level_correlation = 0.8;       // share of the offset noise common to a level's cells
  bool size_relative = true;            // sigma is in strides at S = s_k and scales with S / s_k
  double objectness_base = 0.95;
  double objectness_penalty = 0.15;     // subtracted per unit delta^2
  double level_jitter = 0.005;
  double cell_jitter = 0.01;
  double center_falloff = 0.1;          // drop from object center to mask border
  double background_objectness = 0.02;  // scale of |N(0, s)| outside the mask
  double outlier_rate = 0.05;           // cells whose offsets are replaced by noise

  void validate() const;
  double sigma_for_level(std::size_t level) const;
  /// No offset noise and no outlier cells; objectness is unchanged.
  static NoiseModel noiseless();
};

struct Scene {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  CameraIntrinsics K;
  Pose gt_pose;
  KeypointArray3D keypoints;
  std::shared_ptr<const ModelCloud> cloud;
  double projected_size = 0.0;  // max(w, h) of the projected box corners, pixels
  double depth_over_d = 0.0;    // |t| / diameter
};

/// Cube with the requested diameter (corner-to-corner).
ModelCloud default_model(double diameter);

KeypointArray3D box_keypoints(const ModelCloud& cloud);

Scene generate_scene(const ScenarioParams& params, std::shared_ptr<const ModelCloud> cloud,
                     std::uint64_t seed);

/// Throws kObjectNotVisible if a box corner is behind the camera or the
/// object does not reach the image.
PyramidPrediction synthesize_prediction(const Scene& scene, const PyramidSpec& spec,
                                        const NoiseModel& noise, std::uint64_t seed);

inline constexpr const char* kFusedMethod = "fused";

struct MethodOutcome {
  std::string method;        // "fused" or "L<k>"
  double adi_error = 0.0;    // NaN when no pose was produced
  bool success = false;      // adi_error < 0.1 d
  std::optional<Pose> pose;
  std::optional<ErrorCode> failure;
};

struct SceneEvaluation {
  std::uint64_t scene_id = 0;
  double depth_over_d = 0.0;
  std::string band;  // empty when outside every band
  std::vector<MethodOutcome> methods;
};

SceneEvaluation evaluate_scene(const Scene& scene, const PyramidPrediction& pred,
                               const FusionParams& fusion, const DepthBands& bands);

struct BenchmarkOptions {
  std::size_t n_scenes = 1000;
  std::uint64_t seed = 0;
  std::size_t shard_index = 0;
  std::size_t shard_count = 1;
  unsigned jobs = 1;
};

struct SimulationSetup {
  ScenarioParams scenario;
  NoiseModel noise;
  PyramidSpec spec = PyramidSpec::standard();
  FusionParams fusion;
  DepthBands bands;
  std::shared_ptr<const ModelCloud> cloud;  // defaults to the cube model

  std::shared_ptr<const ModelCloud> model() const;
};

/// Scene ids [first, last) handled by a shard: contiguous blocks, so shard
/// outputs concatenate into the unsharded output.
std::pair<std::size_t, std::size_t> shard_range(std::size_t n, std::size_t index, std::size_t count);

/// Scene and prediction for one benchmark id; both are functions of
/// (seed, scene_id) only.
std::pair<Scene, PyramidPrediction> simulate_scene(const SimulationSetup& setup,
                                                   std::uint64_t master_seed,
                                                   std::uint64_t scene_id);

/// Per-scene RANSAC seed, so results do not depend on evaluation order.
FusionParams fusion_params_for_scene(const FusionParams& base, const Scene& scene);

/// Ordered by scene id regardless of how many worker threads are used.
std::vector<SceneEvaluation> run_benchmark(const SimulationSetup& setup,
                                           const BenchmarkOptions& options);

struct AccuracyTable {
  std::vector<std::string> methods;
  std::vector<std::string> bands;          // band names, then "all"
  std::vector<std::vector<double>> value;  // [method][band]
  std::vector<std::vector<std::size_t>> count;

  double at(const std::string& method, const std::string& band) const;
};

AccuracyTable summarize(const std::vector<SceneEvaluation>& rows, const DepthBands& bands);

}  // namespace widepose
