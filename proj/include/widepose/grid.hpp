#pragma once

// Multi-level prediction grids. Each cell of each pyramid level carries one
// objectness score and eight 2D offsets, one per corner of the object's 3D
// bounding box. Offsets are measured from the cell center in units of the
// level stride.

#include "widepose/geometry.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace widepose {

inline constexpr std::size_t kNumKeypoints = 8;

using KeypointArray2D = std::array<Point2D, kNumKeypoints>;
using KeypointArray3D = std::array<Keypoint3D, kNumKeypoints>;

struct LevelSpec {
  int index = 1;              // k, 1-based, for reporting
  int stride = 8;             // pixels per cell
  double reference_size = 16; // s_k, pixels
};

struct CellIndex {
  int row = 0;
  int col = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

struct PyramidSpec {
  int width = 512;
  int height = 512;
  std::vector<LevelSpec> levels;

  /// 512x512 input, strides 8..128, reference sizes 16..256.
  static PyramidSpec standard();

  void validate() const;
  std::size_t num_levels() const { return levels.size(); }
  int rows(std::size_t level) const;
  int cols(std::size_t level) const;
  std::size_t cell_count(std::size_t level) const;
  std::vector<double> reference_sizes() const;

  /// Throws kOutOfBounds for an unknown level or a cell outside the grid.
  void check_cell(std::size_t level, CellIndex cell) const;

  /// Keeps only the listed level positions (0-based), in the given order.
  PyramidSpec subset(std::span<const std::size_t> level_positions) const;
};

struct CellPrediction {
  double objectness = 0.0;
  std::array<Vec2, kNumKeypoints> offsets{};  // value-initialized: all zero
};

class PyramidPrediction {
 public:
  PyramidPrediction() = default;
  explicit PyramidPrediction(PyramidSpec spec);

  const PyramidSpec& spec() const { return spec_; }

  CellPrediction& at(std::size_t level, CellIndex cell);
  const CellPrediction& at(std::size_t level, CellIndex cell) const;

  std::span<const CellPrediction> level(std::size_t level) const { return cells_.at(level); }
  std::span<CellPrediction> level(std::size_t level) { return cells_.at(level); }

  /// Copy containing only one level (the spec is reduced accordingly).
  PyramidPrediction single_level(std::size_t level) const;

 private:
  PyramidSpec spec_;
  std::vector<std::vector<CellPrediction>> cells_;
};

class SegmentationMask {
 public:
  SegmentationMask() = default;
  explicit SegmentationMask(const PyramidSpec& spec);

  bool contains(std::size_t level, CellIndex cell) const;
  void set(std::size_t level, CellIndex cell, bool value);
  std::size_t count(std::size_t level) const;
  std::vector<CellIndex> cells(std::size_t level) const;
  std::size_t num_levels() const { return bits_.size(); }

 private:
  std::vector<int> cols_;
  std::vector<std::vector<std::uint8_t>> bits_;
};

Point2D cell_center(const PyramidSpec& spec, std::size_t level, CellIndex cell);

/// Cell whose footprint contains the image point, if the point is in the image.
std::optional<CellIndex> cell_containing(const PyramidSpec& spec, std::size_t level,
                                         const Point2D& u);

KeypointArray2D decode_keypoints(const PyramidSpec& spec, std::size_t level, CellIndex cell,
                                 const CellPrediction& pred);

std::array<Vec2, kNumKeypoints> encode_keypoints(const PyramidSpec& spec, std::size_t level,
                                                 CellIndex cell, const KeypointArray2D& targets);

/// Convex hull with positive signed area in (u, v); collinear points dropped.
std::vector<Point2D> convex_hull(std::span<const Point2D> points);
double polygon_area(std::span<const Point2D> polygon);

/// Marks the cells whose centers fall inside (or on) the convex hull of the
/// points. Throws kInvalidArgument for < 3 points and kDegenerateHull when the
/// hull area is below 1e-9.
SegmentationMask rasterize_mask(const PyramidSpec& spec, std::span<const Point2D> points);

// Line-oriented dump: level,row,col,objectness followed by 16 offset values.
// level is the 1-based level index.
void write_prediction_csv(std::ostream& os, const PyramidPrediction& pred);
PyramidPrediction read_prediction_csv(std::istream& is, const PyramidSpec& spec);

}  // namespace widepose
