#pragma once

#include "widepose/geometry.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace widepose {

/// Model points used by the ADD/ADI metrics. The diameter is the largest
/// pairwise distance, computed on construction.
class ModelCloud {
 public:
  ModelCloud() = default;
  explicit ModelCloud(std::vector<Vec3> points);

  const std::vector<Vec3>& points() const { return points_; }
  double diameter() const { return diameter_; }

  /// Axis-aligned bounding box corners, ordered by the bits (x, y, z) of the
  /// corner index: bit 0 selects max x, bit 1 max y, bit 2 max z.
  std::vector<Vec3> bounding_box_corners() const;

  /// Box surface sampled on a regular grid with `per_edge` points per edge.
  static ModelCloud box(const Vec3& extent, int per_edge = 5);

  /// Vertices only; faces and other records are ignored.
  static ModelCloud load_obj(const std::filesystem::path& path);
  /// ASCII PLY, vertex x/y/z properties only.
  static ModelCloud load_ply(const std::filesystem::path& path);
  /// Dispatches on the file extension.
  static ModelCloud load(const std::filesystem::path& path);

 private:
  std::vector<Vec3> points_;
  double diameter_ = 0.0;
};

double add_distance(const Pose& gt, const Pose& est, const ModelCloud& cloud);

/// Mean distance from each ground-truth-posed point to the nearest
/// estimate-posed point. Brute force.
double adi_distance(const Pose& gt, const Pose& est, const ModelCloud& cloud);

struct AccuracyResult {
  double fraction = 0.0;
  bool empty = false;  // no samples: fraction is reported as 0
};

/// Fraction of errors strictly below threshold_frac * diameter.
AccuracyResult adi_accuracy(std::span<const double> errors, double diameter,
                            double threshold_frac = 0.1);

struct SpeedScore {
  double e_q = 0.0;  // radians
  double e_t = 0.0;
  double total = 0.0;
};

/// Quaternion angle 2 acos|<q_gt, q_est>| plus translation error normalized
/// by |t_gt|. Throws kZeroTranslation when |t_gt| == 0.
SpeedScore speed_score(const Pose& gt, const Pose& est);

struct DepthBand {
  std::string name;
  double lo = 0.0;  // multiples of the diameter
  double hi = 0.0;
};

/// Half-open bands [lo, hi); the last band also accepts depth == hi.
struct DepthBands {
  std::vector<DepthBand> bands = {{"near", 1.0, 4.0}, {"medium", 4.0, 7.0}, {"far", 7.0, 10.0}};

  void validate() const;
  std::optional<std::size_t> find(double depth_over_d) const;
  /// Throws kOutOfRange outside every band.
  std::size_t band_of(double depth_over_d) const;
};

struct BandPartition {
  std::vector<std::vector<std::size_t>> members;  // scene indices per band
  std::vector<std::size_t> out_of_range;
};

BandPartition bucket_by_depth(std::span<const double> depth_over_d, const DepthBands& bands);

}  // namespace widepose
