#include "widepose/grid.hpp"

#include "widepose/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace widepose {

PyramidSpec PyramidSpec::standard() {
  PyramidSpec spec;
  spec.width = 512;
  spec.height = 512;
  spec.levels = {{1, 8, 16.0}, {2, 16, 32.0}, {3, 32, 64.0}, {4, 64, 128.0}, {5, 128, 256.0}};
  return spec;
}

void PyramidSpec::validate() const {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "image size must be positive");
  }
  if (levels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "pyramid needs at least one level");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].stride <= 0 || !(levels[i].reference_size > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "strides and reference sizes must be positive");
    }
    if (i > 0 && (levels[i].stride <= levels[i - 1].stride ||
                  levels[i].reference_size <= levels[i - 1].reference_size)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "strides and reference sizes must increase strictly with level");
    }
  }
}

int PyramidSpec::rows(std::size_t level) const {
  const int s = levels.at(level).stride;
  return (height + s - 1) / s;
}

int PyramidSpec::cols(std::size_t level) const {
  const int s = levels.at(level).stride;
  return (width + s - 1) / s;
}

std::size_t PyramidSpec::cell_count(std::size_t level) const {
  return static_cast<std::size_t>(rows(level)) * static_cast<std::size_t>(cols(level));
}

std::vector<double> PyramidSpec::reference_sizes() const {
  std::vector<double> out;
  out.reserve(levels.size());
  for (const auto& l : levels) out.push_back(l.reference_size);
  return out;
}

void PyramidSpec::check_cell(std::size_t level, CellIndex cell) const {
  if (level >= levels.size()) {
    throw Error(ErrorCode::kOutOfBounds, "level " + std::to_string(level) + " does not exist");
  }
  if (cell.row < 0 || cell.col < 0 || cell.row >= rows(level) || cell.col >= cols(level)) {
    throw Error(ErrorCode::kOutOfBounds, "cell (" + std::to_string(cell.row) + ", " +
                                             std::to_string(cell.col) + ") outside the grid");
  }
}

PyramidSpec PyramidSpec::subset(std::span<const std::size_t> level_positions) const {
  PyramidSpec out;
  out.width = width;
  out.height = height;
  for (std::size_t p : level_positions) out.levels.push_back(levels.at(p));
  return out;
}

PyramidPrediction::PyramidPrediction(PyramidSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  cells_.resize(spec_.num_levels());
  for (std::size_t k = 0; k < spec_.num_levels(); ++k) cells_[k].resize(spec_.cell_count(k));
}

CellPrediction& PyramidPrediction::at(std::size_t level, CellIndex cell) {
  spec_.check_cell(level, cell);
  return cells_[level][static_cast<std::size_t>(cell.row) * spec_.cols(level) + cell.col];
}

const CellPrediction& PyramidPrediction::at(std::size_t level, CellIndex cell) const {
  spec_.check_cell(level, cell);
  return cells_[level][static_cast<std::size_t>(cell.row) * spec_.cols(level) + cell.col];
}

PyramidPrediction PyramidPrediction::single_level(std::size_t level) const {
  const std::size_t positions[] = {level};
  PyramidPrediction out(spec_.subset(positions));
  out.cells_[0] = cells_.at(level);
  return out;
}

SegmentationMask::SegmentationMask(const PyramidSpec& spec) {
  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    cols_.push_back(spec.cols(k));
    bits_.emplace_back(spec.cell_count(k), 0);
  }
}

bool SegmentationMask::contains(std::size_t level, CellIndex cell) const {
  return bits_.at(level).at(static_cast<std::size_t>(cell.row) * cols_[level] + cell.col) != 0;
}

void SegmentationMask::set(std::size_t level, CellIndex cell, bool value) {
  bits_.at(level).at(static_cast<std::size_t>(cell.row) * cols_[level] + cell.col) = value ? 1 : 0;
}

std::size_t SegmentationMask::count(std::size_t level) const {
  return static_cast<std::size_t>(std::count(bits_.at(level).begin(), bits_.at(level).end(), 1));
}

std::vector<CellIndex> SegmentationMask::cells(std::size_t level) const {
  std::vector<CellIndex> out;
  const auto& b = bits_.at(level);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i]) out.push_back({static_cast<int>(i / cols_[level]), static_cast<int>(i % cols_[level])});
  }
  return out;
}

Point2D cell_center(const PyramidSpec& spec, std::size_t level, CellIndex cell) {
  spec.check_cell(level, cell);
  const double s = spec.levels[level].stride;
  return {(cell.col + 0.5) * s, (cell.row + 0.5) * s};
}

std::optional<CellIndex> cell_containing(const PyramidSpec& spec, std::size_t level,
                                         const Point2D& u) {
  if (level >= spec.num_levels() || !u.allFinite()) return std::nullopt;
  const double s = spec.levels[level].stride;
  const double col = std::floor(u.x() / s);
  const double row = std::floor(u.y() / s);
  if (col < 0 || row < 0 || col >= spec.cols(level) || row >= spec.rows(level)) {
    return std::nullopt;
  }
  return CellIndex{static_cast<int>(row), static_cast<int>(col)};
}

KeypointArray2D decode_keypoints(const PyramidSpec& spec, std::size_t level, CellIndex cell,
                                 const CellPrediction& pred) {
  const Point2D c = cell_center(spec, level, cell);
  const double s = spec.levels[level].stride;
  KeypointArray2D out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) out[i] = c + pred.offsets[i] * s;
  return out;
}

std::array<Vec2, kNumKeypoints> encode_keypoints(const PyramidSpec& spec, std::size_t level,
                                                 CellIndex cell, const KeypointArray2D& targets) {
  const Point2D c = cell_center(spec, level, cell);
  const double s = spec.levels[level].stride;
  std::array<Vec2, kNumKeypoints> out;
  for (std::size_t i = 0; i < kNumKeypoints; ++i) out[i] = (targets[i] - c) / s;
  return out;
}

namespace {

double cross(const Point2D& o, const Point2D& a, const Point2D& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

std::vector<Point2D> convex_hull(std::span<const Point2D> points) {
  std::vector<Point2D> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Point2D& a, const Point2D& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Point2D> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(std::span<const Point2D> polygon) {
  double a = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const auto& p = polygon[i];
    const auto& q = polygon[(i + 1) % polygon.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(a);
}

SegmentationMask rasterize_mask(const PyramidSpec& spec, std::span<const Point2D> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::kInvalidArgument, "mask hull needs at least 3 points");
  }
  const std::vector<Point2D> hull = convex_hull(points);
  if (hull.size() < 3 || polygon_area(hull) < 1e-9) {
    throw Error(ErrorCode::kDegenerateHull, "projected hull has zero area");
  }

  double min_x = hull[0].x(), max_x = min_x, min_y = hull[0].y(), max_y = min_y;
  for (const auto& p : hull) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  // Edge-inclusive with a tolerance relative to the hull extent.
  const double tol = 1e-9 * std::max({1.0, max_x - min_x, max_y - min_y});

  auto inside = [&](const Point2D& c) {
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const auto& a = hull[i];
      const auto& b = hull[(i + 1) % hull.size()];
      const double len = (b - a).norm();
      if (cross(a, b, c) < -tol * len) return false;
    }
    return true;
  };

  SegmentationMask mask(spec);
  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    const double s = spec.levels[k].stride;
    const int r0 = std::max(0, static_cast<int>(std::floor(min_y / s - 0.5)));
    const int r1 = std::min(spec.rows(k) - 1, static_cast<int>(std::ceil(max_y / s - 0.5)));
    const int c0 = std::max(0, static_cast<int>(std::floor(min_x / s - 0.5)));
    const int c1 = std::min(spec.cols(k) - 1, static_cast<int>(std::ceil(max_x / s - 0.5)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (inside(Point2D((c + 0.5) * s, (r + 0.5) * s))) mask.set(k, {r, c}, true);
      }
    }
  }
  return mask;
}

void write_prediction_csv(std::ostream& os, const PyramidPrediction& pred) {
  const auto& spec = pred.spec();
  os << "level,row,col,objectness";
  for (std::size_t i = 0; i < kNumKeypoints; ++i) os << ",dx" << i << ",dy" << i;
  os << '\n';
  const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    for (int r = 0; r < spec.rows(k); ++r) {
      for (int c = 0; c < spec.cols(k); ++c) {
        const auto& cell = pred.at(k, {r, c});
        os << spec.levels[k].index << ',' << r << ',' << c << ',' << cell.objectness;
        for (const auto& o : cell.offsets) os << ',' << o.x() << ',' << o.y();
        os << '\n';
      }
    }
  }
  os.precision(old_precision);
}

PyramidPrediction read_prediction_csv(std::istream& is, const PyramidSpec& spec) {
  PyramidPrediction pred(spec);
  std::string line;
  if (!std::getline(is, line)) {
    throw Error(ErrorCode::kInvalidArgument, "empty prediction csv");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    int level_index = 0, r = 0, c = 0;
    CellPrediction cell;
    ss >> level_index >> r >> c >> cell.objectness;
    for (auto& o : cell.offsets) ss >> o.x() >> o.y();
    if (!ss) throw Error(ErrorCode::kInvalidArgument, "malformed prediction csv row: " + line);
    std::size_t pos = spec.num_levels();
    for (std::size_t k = 0; k < spec.num_levels(); ++k) {
      if (spec.levels[k].index == level_index) pos = k;
    }
    pred.at(pos, {r, c}) = cell;
  }
  return pred;
}

}  // namespace widepose
