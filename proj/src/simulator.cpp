#include "widepose/simulator.hpp"

#include "widepose/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace widepose {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void ScenarioParams::validate() const {
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) {
    throw Error(ErrorCode::kInvalidArgument, "field of view must lie in (0, 180)");
  }
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
  if (!(depth_min >= 1.0) || !(depth_max > depth_min)) {
    throw Error(ErrorCode::kInvalidArgument, "depth range must satisfy 1 <= min < max");
  }
  if (!(diameter > 0.0)) throw Error(ErrorCode::kInvalidArgument, "diameter must be positive");
}

void NoiseModel::validate() const {
  if (!(sigma_strides >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  for (double s : level_sigma) {
    if (!(s >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be >= 0");
  }
  if (!(scale_mismatch_gain >= 0.0) || !(objectness_penalty >= 0.0) || !(level_jitter >= 0.0) ||
      !(cell_jitter >= 0.0) || !(center_falloff >= 0.0) || !(background_objectness >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise model scales must be non-negative");
  }
  if (!(level_correlation >= 0.0 && level_correlation <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "level correlation must lie in [0, 1]");
  }
  if (!(outlier_rate >= 0.0 && outlier_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "outlier rate must lie in [0, 1]");
  }
}

double NoiseModel::sigma_for_level(std::size_t level) const {
  return level < level_sigma.size() ? level_sigma[level] : sigma_strides;
}

NoiseModel NoiseModel::noiseless() {
  NoiseModel n;
  n.sigma_strides = 0.0;
  n.outlier_rate = 0.0;
  return n;
}

ModelCloud default_model(double diameter) {
  const double side = diameter / std::sqrt(3.0);
  return ModelCloud::box(Vec3::Constant(side), 5);
}

KeypointArray3D box_keypoints(const ModelCloud& cloud) {
  const auto corners = cloud.bounding_box_corners();
  KeypointArray3D out;
  std::copy(corners.begin(), corners.end(), out.begin());
  return out;
}

namespace {

bool fits_in_image(const CameraIntrinsics& K, const Pose& pose, const KeypointArray3D& corners,
                   int width, int height) {
  for (const auto& p : corners) {
    const Vec3 xc = pose.apply(p);
    if (!(xc.z() > kDepthEpsilon)) return false;
    const Point2D u = project_camera_point(K, xc);
    if (u.x() < 0.0 || u.y() < 0.0 || u.x() > width || u.y() > height) return false;
  }
  return true;
}

}  // namespace

Scene generate_scene(const ScenarioParams& params, std::shared_ptr<const ModelCloud> cloud,
                     std::uint64_t seed) {
  params.validate();
  if (!cloud) cloud = std::make_shared<const ModelCloud>(default_model(params.diameter));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Scene scene;
  scene.seed = seed;
  scene.K = CameraIntrinsics::from_fov(params.fov_deg, params.width, params.height);
  scene.keypoints = box_keypoints(*cloud);
  scene.cloud = cloud;
  const double d = cloud->diameter();
  const Vec3 center = 0.5 * (scene.keypoints.front() + scene.keypoints.back());

  // The distance is drawn once so that depth/d stays exactly uniform;
  // only the viewing direction (and, after repeated misses, the rotation)
  // is resampled until the object fits.
  const double distance = d * (params.depth_min + (params.depth_max - params.depth_min) * unit(rng));
  Eigen::Quaterniond q = random_rotation(rng);
  for (int attempt = 0;; ++attempt) {
    if (attempt > 0 && attempt % 64 == 0) q = random_rotation(rng);
    Point2D target(params.width * unit(rng), params.height * unit(rng));
    if (attempt >= 4096) target = {0.5 * params.width, 0.5 * params.height};
    const Vec3 dir = backproject_ray(scene.K, target).normalized();
    // Place the box center on the ray at the sampled distance.
    const Pose pose(q, distance * dir - (q * center));
    const bool ok = params.allow_truncation
                        ? pose.apply(center).z() > kDepthEpsilon
                        : fits_in_image(scene.K, pose, scene.keypoints, params.width, params.height);
    if (ok || attempt >= 4096) {
      scene.gt_pose = pose;
      break;
    }
  }

  scene.depth_over_d = (scene.gt_pose.apply(center)).norm() / d;
  KeypointArray2D projected;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    projected[i] = project(scene.K, scene.gt_pose, scene.keypoints[i]);
  }
  scene.projected_size = keypoint_extent(projected);
  return scene;
}

PyramidPrediction synthesize_prediction(const Scene& scene, const PyramidSpec& spec,
                                        const NoiseModel& noise, std::uint64_t seed) {
  noise.validate();
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  KeypointArray2D truth;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) {
    const Vec3 xc = scene.gt_pose.apply(scene.keypoints[i]);
    if (!(xc.z() > kDepthEpsilon)) {
      throw Error(ErrorCode::kObjectNotVisible, "object box is behind the camera");
    }
    truth[i] = project_camera_point(scene.K, xc);
  }
  const double size = keypoint_extent(truth);

  std::vector<Point2D> silhouette;
  silhouette.reserve(scene.cloud->points().size());
  for (const auto& p : scene.cloud->points()) {
    const Vec3 xc = scene.gt_pose.apply(p);
    if (!(xc.z() > kDepthEpsilon)) {
      throw Error(ErrorCode::kObjectNotVisible, "object crosses the camera plane");
    }
    silhouette.push_back(project_camera_point(scene.K, xc));
  }
  SegmentationMask mask = rasterize_mask(spec, silhouette);

  const Vec3 center3 = 0.5 * (scene.keypoints.front() + scene.keypoints.back());
  const Point2D center = project(scene.K, scene.gt_pose, center3);
  // The cell under the object center is always active, so a level whose
  // cells are all larger than the object still sees it.
  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    if (const auto c = cell_containing(spec, k, center)) mask.set(k, *c, true);
  }
  bool any = false;
  for (std::size_t k = 0; k < spec.num_levels(); ++k) any = any || mask.count(k) > 0;
  if (!any) throw Error(ErrorCode::kObjectNotVisible, "object does not reach the image");

  PyramidPrediction pred(spec);
  const double half_size = std::max(0.5 * size, 1e-9);
  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    const double delta = std::abs(std::log2(size / spec.levels[k].reference_size));
    const double stride = spec.levels[k].stride;
    const double level_score =
        noise.objectness_base - noise.objectness_penalty * delta * delta + noise.level_jitter * gauss(rng);
    // Offsets are in stride units, so this is sigma * stride in pixels.
    const double scale = noise.size_relative ? size / spec.levels[k].reference_size : 1.0;
    const double sigma =
        noise.sigma_for_level(k) * scale * (1.0 + noise.scale_mismatch_gain * delta * delta);
    // Per-cell noise = rho * (level-wide draw) + sqrt(1 - rho^2) * (own draw).
    const double rho = noise.level_correlation;
    const double own = std::sqrt(1.0 - rho * rho);
    std::array<Vec2, kNumKeypoints> shared;
    for (auto& b : shared) b = Vec2(gauss(rng), gauss(rng));

    for (int r = 0; r < spec.rows(k); ++r) {
      for (int c = 0; c < spec.cols(k); ++c) {
        CellPrediction& cell = pred.at(k, {r, c});
        if (!mask.contains(k, {r, c})) {
          cell.objectness = std::min(1.0, std::abs(noise.background_objectness * gauss(rng)));
          continue;
        }
        // Distance from the object center to the cell footprint, so the cell
        // under the center scores the same at every level.
        const Vec2 gap = ((cell_center(spec, k, {r, c}) - center).cwiseAbs().array() - 0.5 * stride)
                             .cwiseMax(0.0)
                             .matrix();
        const double radial = gap.norm() / half_size;
        cell.objectness = std::clamp(level_score - noise.center_falloff * radial * radial +
                                         noise.cell_jitter * gauss(rng),
                                     0.0, 1.0);
        // The outlier draw happens for every cell so that toggling the rate
        // does not shift the rest of the stream.
        const bool outlier = unit(rng) < noise.outlier_rate;
        if (outlier) {
          KeypointArray2D junk;
          for (auto& u : junk) u = Point2D(spec.width * unit(rng), spec.height * unit(rng));
          cell.offsets = encode_keypoints(spec, k, {r, c}, junk);
        } else {
          cell.offsets = encode_keypoints(spec, k, {r, c}, truth);
          if (sigma > 0.0) {
            for (std::size_t i = 0; i < kNumKeypoints; ++i) {
              cell.offsets[i] += sigma * (rho * shared[i] + own * Vec2(gauss(rng), gauss(rng)));
            }
          }
        }
      }
    }
  }
  return pred;
}

SceneEvaluation evaluate_scene(const Scene& scene, const PyramidPrediction& pred,
                               const FusionParams& fusion, const DepthBands& bands) {
  SceneEvaluation out;
  out.scene_id = scene.id;
  out.depth_over_d = scene.depth_over_d;
  if (const auto b = bands.find(scene.depth_over_d)) out.band = bands.bands[*b].name;

  const double threshold = 0.1 * scene.cloud->diameter();
  auto score = [&](MethodOutcome& m) {
    if (m.pose) {
      m.adi_error = adi_distance(scene.gt_pose, *m.pose, *scene.cloud);
      m.success = m.adi_error < threshold;
    } else {
      m.adi_error = std::numeric_limits<double>::quiet_NaN();
      m.success = false;
    }
  };

  MethodOutcome fused;
  fused.method = kFusedMethod;
  try {
    fused.pose = fuse_pose(pred, scene.keypoints, scene.K, fusion).pose.pose;
  } catch (const Error& e) {
    fused.failure = e.code();
  }
  score(fused);
  out.methods.push_back(std::move(fused));

  for (std::size_t k = 0; k < pred.spec().num_levels(); ++k) {
    const LevelDiagnostic diag = level_pose(pred, k, scene.keypoints, scene.K, fusion);
    MethodOutcome m;
    m.method = "L" + std::to_string(diag.level_index);
    if (diag.result) m.pose = diag.result->pose;
    m.failure = diag.failure;
    score(m);
    out.methods.push_back(std::move(m));
  }
  return out;
}

std::shared_ptr<const ModelCloud> SimulationSetup::model() const {
  return cloud ? cloud : std::make_shared<const ModelCloud>(default_model(scenario.diameter));
}

std::pair<std::size_t, std::size_t> shard_range(std::size_t n, std::size_t index, std::size_t count) {
  if (count == 0 || index >= count) {
    throw Error(ErrorCode::kInvalidArgument, "shard index must be below the shard count");
  }
  return {n * index / count, n * (index + 1) / count};
}

std::pair<Scene, PyramidPrediction> simulate_scene(const SimulationSetup& setup,
                                                   std::uint64_t master_seed,
                                                   std::uint64_t scene_id) {
  const std::uint64_t scene_seed = derive_seed(master_seed, scene_id);
  Scene scene = generate_scene(setup.scenario, setup.model(), derive_seed(scene_seed, 1));
  scene.id = scene_id;
  scene.seed = scene_seed;
  PyramidPrediction pred = synthesize_prediction(scene, setup.spec, setup.noise, derive_seed(scene_seed, 2));
  return {std::move(scene), std::move(pred)};
}

FusionParams fusion_params_for_scene(const FusionParams& base, const Scene& scene) {
  FusionParams p = base;
  p.ransac.seed = derive_seed(derive_seed(scene.seed, 3), base.ransac.seed);
  return p;
}

std::vector<SceneEvaluation> run_benchmark(const SimulationSetup& setup,
                                           const BenchmarkOptions& options) {
  setup.scenario.validate();
  setup.noise.validate();
  setup.fusion.validate();
  const auto [first, last] = shard_range(options.n_scenes, options.shard_index, options.shard_count);

  SimulationSetup shared = setup;
  shared.cloud = setup.model();

  std::vector<SceneEvaluation> rows(last - first);
  auto work = [&](std::size_t begin_offset, std::size_t step) {
    for (std::size_t i = begin_offset; i < rows.size(); i += step) {
      const std::uint64_t id = first + i;
      auto [scene, pred] = simulate_scene(shared, options.seed, id);
      rows[i] = evaluate_scene(scene, pred, fusion_params_for_scene(shared.fusion, scene),
                               shared.bands);
    }
  };

  const unsigned jobs = std::max(1u, options.jobs);
  if (jobs == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
  }
  return rows;
}

double AccuracyTable::at(const std::string& method, const std::string& band) const {
  const auto mi = std::find(methods.begin(), methods.end(), method);
  const auto bi = std::find(bands.begin(), bands.end(), band);
  if (mi == methods.end() || bi == bands.end()) {
    throw Error(ErrorCode::kInvalidArgument, "unknown method or band: " + method + "/" + band);
  }
  return value[mi - methods.begin()][bi - bands.begin()];
}

AccuracyTable summarize(const std::vector<SceneEvaluation>& rows, const DepthBands& bands) {
  AccuracyTable t;
  for (const auto& b : bands.bands) t.bands.push_back(b.name);
  t.bands.push_back("all");
  if (!rows.empty()) {
    for (const auto& m : rows.front().methods) t.methods.push_back(m.method);
  }
  std::vector<std::vector<std::size_t>> hits(t.methods.size(), std::vector<std::size_t>(t.bands.size()));
  t.count.assign(t.methods.size(), std::vector<std::size_t>(t.bands.size()));
  for (const auto& row : rows) {
    const auto band_it = std::find(t.bands.begin(), t.bands.end(), row.band);
    for (std::size_t m = 0; m < row.methods.size() && m < t.methods.size(); ++m) {
      const std::size_t all = t.bands.size() - 1;
      const std::size_t hit = row.methods[m].success ? 1 : 0;
      if (band_it != t.bands.end() && !row.band.empty()) {
        const auto b = static_cast<std::size_t>(band_it - t.bands.begin());
        t.count[m][b] += 1;
        hits[m][b] += hit;
      }
      t.count[m][all] += 1;
      hits[m][all] += hit;
    }
  }
  t.value.assign(t.methods.size(), std::vector<double>(t.bands.size(), 0.0));
  for (std::size_t m = 0; m < t.methods.size(); ++m) {
    for (std::size_t b = 0; b < t.bands.size(); ++b) {
      t.value[m][b] = t.count[m][b] > 0 ? static_cast<double>(hits[m][b]) / t.count[m][b] : 0.0;
    }
  }
  return t;
}

}  // namespace widepose
