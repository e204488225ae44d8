#include "widepose/metrics.hpp"

#include "widepose/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace widepose {

ModelCloud::ModelCloud(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "model cloud needs at least two points");
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite()) {
      throw Error(ErrorCode::kInvalidArgument, "model cloud contains non-finite coordinates");
    }
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      d2 = std::max(d2, (points_[i] - points_[j]).squaredNorm());
    }
  }
  diameter_ = std::sqrt(d2);
  if (!(diameter_ > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "model cloud has zero diameter");
  }
}

std::vector<Vec3> ModelCloud::bounding_box_corners() const {
  Vec3 lo = points_.front(), hi = points_.front();
  for (const auto& p : points_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::vector<Vec3> corners;
  for (int i = 0; i < 8; ++i) {
    corners.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                         (i & 4) ? hi.z() : lo.z());
  }
  return corners;
}

ModelCloud ModelCloud::box(const Vec3& extent, int per_edge) {
  if (per_edge < 2 || !(extent.minCoeff() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "box needs positive extent and >= 2 points per edge");
  }
  const Vec3 half = 0.5 * extent;
  std::vector<Vec3> pts;
  const int n = per_edge - 1;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      for (int k = 0; k <= n; ++k) {
        // Surface points only.
        if (i != 0 && i != n && j != 0 && j != n && k != 0 && k != n) continue;
        pts.emplace_back(-half.x() + extent.x() * i / n, -half.y() + extent.y() * j / n,
                         -half.z() + extent.z() * k / n);
      }
    }
  }
  return ModelCloud(std::move(pts));
}

ModelCloud ModelCloud::load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path.string());
  std::vector<Vec3> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.size() < 2 || line[0] != 'v' || (line[1] != ' ' && line[1] != '\t')) continue;
    std::istringstream ss(line.substr(2));
    Vec3 p;
    if (!(ss >> p.x() >> p.y() >> p.z())) {
      throw Error(ErrorCode::kInvalidArgument, "malformed OBJ vertex: " + line);
    }
    pts.push_back(p);
  }
  return ModelCloud(std::move(pts));
}

ModelCloud ModelCloud::load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw Error(ErrorCode::kInvalidArgument, "not a PLY file");

  std::size_t vertex_count = 0;
  std::vector<std::string> vertex_props;
  bool in_vertex = false;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string fmt;
      ss >> fmt;
      ascii = fmt == "ascii";
    } else if (word == "element") {
      std::string name;
      ss >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ss >> vertex_count;
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ss >> type;
      if (type == "list") throw Error(ErrorCode::kInvalidArgument, "list vertex properties unsupported");
      ss >> name;
      vertex_props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error(ErrorCode::kInvalidArgument, "only ASCII PLY is supported");
  const auto index_of = [&](const std::string& name) {
    const auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
    if (it == vertex_props.end()) throw Error(ErrorCode::kInvalidArgument, "PLY lacks " + name);
    return static_cast<std::size_t>(it - vertex_props.begin());
  };
  const std::size_t ix = index_of("x"), iy = index_of("y"), iz = index_of("z");

  std::vector<Vec3> pts;
  pts.reserve(vertex_count);
  std::vector<double> values(vertex_props.size());
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!std::getline(in, line)) throw Error(ErrorCode::kInvalidArgument, "truncated PLY");
    std::istringstream ss(line);
    for (double& x : values) ss >> x;
    if (!ss) throw Error(ErrorCode::kInvalidArgument, "malformed PLY vertex: " + line);
    pts.emplace_back(values[ix], values[iy], values[iz]);
  }
  return ModelCloud(std::move(pts));
}

ModelCloud ModelCloud::load(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".obj") return load_obj(path);
  if (ext == ".ply") return load_ply(path);
  throw Error(ErrorCode::kInvalidArgument, "unsupported model format: " + ext);
}

double add_distance(const Pose& gt, const Pose& est, const ModelCloud& cloud) {
  const Mat3 Rg = gt.rotation(), Re = est.rotation();
  double sum = 0.0;
  for (const auto& p : cloud.points()) {
    sum += ((Rg * p + gt.translation()) - (Re * p + est.translation())).norm();
  }
  return sum / static_cast<double>(cloud.points().size());
}

double adi_distance(const Pose& gt, const Pose& est, const ModelCloud& cloud) {
  const auto& pts = cloud.points();
  if (pts.size() < 2) throw Error(ErrorCode::kInvalidArgument, "ADI needs at least two points");
  const Mat3 Rg = gt.rotation(), Re = est.rotation();
  std::vector<Vec3> est_pts;
  est_pts.reserve(pts.size());
  for (const auto& p : pts) est_pts.push_back(Re * p + est.translation());

  double sum = 0.0;
  for (const auto& p : pts) {
    const Vec3 g = Rg * p + gt.translation();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : est_pts) best = std::min(best, (g - e).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(pts.size());
}

AccuracyResult adi_accuracy(std::span<const double> errors, double diameter, double threshold_frac) {
  if (!(diameter > 0.0)) throw Error(ErrorCode::kInvalidArgument, "diameter must be positive");
  AccuracyResult out;
  if (errors.empty()) {
    out.empty = true;
    return out;
  }
  const double threshold = threshold_frac * diameter;
  const auto hits = std::count_if(errors.begin(), errors.end(), [&](double e) { return e < threshold; });
  out.fraction = static_cast<double>(hits) / static_cast<double>(errors.size());
  return out;
}

SpeedScore speed_score(const Pose& gt, const Pose& est) {
  const double tn = gt.translation().norm();
  if (!(tn > 0.0)) throw Error(ErrorCode::kZeroTranslation, "ground-truth translation is zero");
  SpeedScore s;
  const double dot = std::clamp(std::abs(gt.quaternion().dot(est.quaternion())), 0.0, 1.0);
  s.e_q = 2.0 * std::acos(dot);
  s.e_t = (gt.translation() - est.translation()).norm() / tn;
  s.total = s.e_q + s.e_t;
  return s;
}

void DepthBands::validate() const {
  if (bands.empty()) throw Error(ErrorCode::kInvalidArgument, "at least one depth band is required");
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (!(bands[i].hi > bands[i].lo)) {
      throw Error(ErrorCode::kInvalidArgument, "depth band bounds must increase");
    }
    if (i > 0 && bands[i].lo < bands[i - 1].hi) {
      throw Error(ErrorCode::kInvalidArgument, "depth bands overlap");
    }
  }
}

std::optional<std::size_t> DepthBands::find(double depth_over_d) const {
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (depth_over_d >= bands[i].lo && depth_over_d < bands[i].hi) return i;
  }
  if (!bands.empty() && depth_over_d == bands.back().hi) return bands.size() - 1;
  return std::nullopt;
}

std::size_t DepthBands::band_of(double depth_over_d) const {
  const auto band = find(depth_over_d);
  if (!band) {
    throw Error(ErrorCode::kOutOfRange,
                "depth " + std::to_string(depth_over_d) + "d lies outside every band");
  }
  return *band;
}

BandPartition bucket_by_depth(std::span<const double> depth_over_d, const DepthBands& bands) {
  bands.validate();
  BandPartition out;
  out.members.resize(bands.bands.size());
  for (std::size_t i = 0; i < depth_over_d.size(); ++i) {
    if (const auto b = bands.find(depth_over_d[i])) {
      out.members[*b].push_back(i);
    } else {
      out.out_of_range.push_back(i);
    }
  }
  return out;
}

}  // namespace widepose
