#include "widepose/losses.hpp"

#include "widepose/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace widepose {

LossParams LossParams::for_diameter(double diameter) {
  if (!(diameter > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "diameter must be positive");
  }
  LossParams p;
  p.smooth_l1_beta = 0.1 * diameter;
  return p;
}

void LossParams::validate() const {
  if (!(smooth_l1_beta > 0.0) || !(pixel_beta > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "smooth-L1 beta must be positive");
  }
  if (!(focal_gamma >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal gamma must be non-negative");
  }
  if (!(focal_alpha > 0.0 && focal_alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "focal alpha must lie in (0, 1)");
  }
}

double smooth_l1(double x, double beta) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
}

double smooth_l1_derivative(double x, double beta) {
  const double a = std::abs(x);
  const double mag = a < beta ? a / beta : 1.0;
  return x < 0.0 ? -mag : mag;
}

Mat3 ray_projection_matrix(const Vec3& v) {
  const double n2 = v.squaredNorm();
  if (!(std::sqrt(n2) > 1e-12)) {
    throw Error(ErrorCode::kZeroRay, "camera ray has zero length");
  }
  return v * v.transpose() / n2;
}

namespace {

// Value and gradient of the per-keypoint penalty on a residual vector.
template <int N>
double penalty(const Eigen::Matrix<double, N, 1>& r, double beta, bool componentwise,
               Eigen::Matrix<double, N, 1>& grad) {
  if (componentwise) {
    double value = 0.0;
    for (int j = 0; j < N; ++j) {
      value += smooth_l1(r[j], beta);
      grad[j] = smooth_l1_derivative(r[j], beta);
    }
    return value;
  }
  const double n = r.norm();
  if (n < beta) {
    grad = r / beta;
  } else {
    grad = r / n;
  }
  return smooth_l1(n, beta);
}

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b || a == 0) {
    throw Error(ErrorCode::kInvalidArgument, "keypoint and prediction counts must match");
  }
}

}  // namespace

Loss3DResult loss3d(const CameraIntrinsics& K, const Pose& gt_pose,
                    std::span<const Keypoint3D> keypoints, std::span<const Point2D> predicted,
                    const LossParams& params) {
  check_sizes(keypoints.size(), predicted.size());
  params.validate();
  K.validate();

  Eigen::Matrix<double, 3, 2> dv_du = Eigen::Matrix<double, 3, 2>::Zero();
  dv_du(0, 0) = 1.0 / K.fx;
  dv_du(1, 1) = 1.0 / K.fy;

  const double scale = params.reduction == Reduction::kMean ? 1.0 / keypoints.size() : 1.0;
  Loss3DResult out;
  out.errors.reserve(keypoints.size());
  out.gradient.reserve(keypoints.size());
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const Vec3 pc = gt_pose.apply(keypoints[i]);
    if (!(pc.z() > kDepthEpsilon)) {
      throw Error(ErrorCode::kNonPositiveDepth, "ground-truth keypoint behind the camera");
    }
    const Vec3 v = backproject_ray(K, predicted[i]);
    const Mat3 V = ray_projection_matrix(v);
    const Vec3 e = pc - V * pc;

    Vec3 g_e;
    out.value += scale * penalty<3>(e, params.smooth_l1_beta, params.componentwise, g_e);

    // e = p - v (v.p) / (v.v)
    const double a = v.dot(pc);
    const double b = v.squaredNorm();
    const Mat3 de_dv =
        -(a / b * Mat3::Identity() + v * pc.transpose() / b - 2.0 * a / (b * b) * v * v.transpose());
    out.errors.push_back(e);
    out.gradient.push_back(scale * (de_dv * dv_du).transpose() * g_e);
  }
  return out;
}

Loss2DResult loss2d(std::span<const Point2D> gt_projections, std::span<const Point2D> predicted,
                    const LossParams& params) {
  check_sizes(gt_projections.size(), predicted.size());
  params.validate();
  const double scale = params.reduction == Reduction::kMean ? 1.0 / predicted.size() : 1.0;
  Loss2DResult out;
  out.gradient.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const Vec2 diff = predicted[i] - gt_projections[i];
    Vec2 g;
    out.value += scale * penalty<2>(diff, params.pixel_beta, params.componentwise, g);
    out.gradient.push_back(scale * g);
  }
  return out;
}

FocalResult focal_loss(double prediction, bool target, const LossParams& params) {
  params.validate();
  const double p = std::clamp(prediction, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double pt = target ? p : 1.0 - p;
  const double at = target ? params.focal_alpha : 1.0 - params.focal_alpha;
  const double gamma = params.focal_gamma;
  const double q = 1.0 - pt;
  const double log_pt = std::log(pt);

  FocalResult out;
  out.value = -at * std::pow(q, gamma) * log_pt;
  // d/dpt of -at q^g log(pt) = at (g q^(g-1) log(pt) - q^g / pt)
  const double dq_term = gamma > 0.0 ? gamma * std::pow(q, gamma - 1.0) * log_pt : 0.0;
  const double d_pt = at * (dq_term - std::pow(q, gamma) / pt);
  const bool clamped = prediction < kProbabilityClamp || prediction > 1.0 - kProbabilityClamp;
  out.gradient = clamped ? 0.0 : (target ? d_pt : -d_pt);
  return out;
}

double total_loss(std::span<const LevelLoss> levels) {
  double total = 0.0;
  for (const auto& l : levels) {
    total += l.objectness;
    total += l.regression;
  }
  return total;
}

std::vector<LevelLoss> evaluate_level_losses(const PyramidPrediction& pred,
                                             const SegmentationMask& mask,
                                             const std::vector<std::vector<CellIndex>>& sampled,
                                             const CameraIntrinsics& K, const Pose& gt_pose,
                                             const KeypointArray3D& keypoints,
                                             const LossParams& params, RegressionLoss kind) {
  const auto& spec = pred.spec();
  if (mask.num_levels() != spec.num_levels() || sampled.size() != spec.num_levels()) {
    throw Error(ErrorCode::kInvalidArgument, "mask and samples must cover every level");
  }
  KeypointArray2D gt_projections;
  if (kind == RegressionLoss::k2D) {
    for (std::size_t i = 0; i < kNumKeypoints; ++i) gt_projections[i] = project(K, gt_pose, keypoints[i]);
  }

  std::vector<LevelLoss> out(spec.num_levels());
  for (std::size_t k = 0; k < spec.num_levels(); ++k) {
    for (int r = 0; r < spec.rows(k); ++r) {
      for (int c = 0; c < spec.cols(k); ++c) {
        out[k].objectness +=
            focal_loss(pred.at(k, {r, c}).objectness, mask.contains(k, {r, c}), params).value;
      }
    }
    for (const CellIndex& cell : sampled[k]) {
      const KeypointArray2D decoded = decode_keypoints(spec, k, cell, pred.at(k, cell));
      out[k].regression += kind == RegressionLoss::k3D
                               ? loss3d(K, gt_pose, keypoints, decoded, params).value
                               : loss2d(gt_projections, decoded, params).value;
    }
  }
  return out;
}

bool GradientCheckReport::passed(double tolerance) const {
  return loss3d_max_rel_err < tolerance && loss2d_max_rel_err < tolerance &&
         focal_max_rel_err < tolerance;
}

namespace {

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max({analytic.lpNorm<Eigen::Infinity>(), numeric.lpNorm<Eigen::Infinity>(), 1e-12});
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

// Central differences of f over every coordinate of the predicted points.
template <typename F>
Eigen::VectorXd numeric_gradient(std::vector<Point2D> x, double h, F&& f) {
  Eigen::VectorXd g(2 * x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int c = 0; c < 2; ++c) {
      const double x0 = x[i][c];
      x[i][c] = x0 + h;
      const double up = f(x);
      x[i][c] = x0 - h;
      const double down = f(x);
      x[i][c] = x0;
      g[2 * i + c] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

Eigen::VectorXd flatten(const std::vector<Vec2>& v) {
  Eigen::VectorXd out(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.segment<2>(2 * i) = v[i];
  return out;
}

}  // namespace

GradientCheckReport gradient_check(int configurations, std::uint64_t seed, double step) {
  if (configurations < 1 || !(step > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "gradient check needs configurations >= 1 and step > 0");
  }
  GradientCheckReport report;
  report.configurations = configurations;
  report.step = step;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int n = 0; n < configurations; ++n) {
    const CameraIntrinsics K = CameraIntrinsics::from_fov(60.0 + 60.0 * unit(rng), 512, 512);
    const double depth = 1.0 + 9.0 * unit(rng);
    const Pose pose(random_rotation(rng), Vec3(0.3 * gauss(rng), 0.3 * gauss(rng), depth));
    std::vector<Keypoint3D> keypoints(kNumKeypoints);
    std::vector<Point2D> truth(kNumKeypoints), predicted(kNumKeypoints);
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
      keypoints[i] = Vec3(unit(rng), unit(rng), unit(rng)).array() - 0.5;
      truth[i] = project(K, pose, keypoints[i]);
      predicted[i] = truth[i] + 8.0 * Vec2(gauss(rng), gauss(rng));
    }
    LossParams params;
    params.componentwise = unit(rng) < 0.5;
    params.reduction = unit(rng) < 0.5 ? Reduction::kSum : Reduction::kMean;

    const auto l3 = loss3d(K, pose, keypoints, predicted, params);
    const auto g3 = numeric_gradient(predicted, step, [&](const std::vector<Point2D>& x) {
      return loss3d(K, pose, keypoints, x, params).value;
    });
    report.loss3d_max_rel_err = std::max(report.loss3d_max_rel_err, relative_error(flatten(l3.gradient), g3));

    const auto l2 = loss2d(truth, predicted, params);
    const auto g2 = numeric_gradient(predicted, step, [&](const std::vector<Point2D>& x) {
      return loss2d(truth, x, params).value;
    });
    report.loss2d_max_rel_err = std::max(report.loss2d_max_rel_err, relative_error(flatten(l2.gradient), g2));

    const double p = 0.01 + 0.98 * unit(rng);
    const bool target = unit(rng) < 0.5;
    const double analytic = focal_loss(p, target, params).gradient;
    const double numeric =
        (focal_loss(p + step, target, params).value - focal_loss(p - step, target, params).value) / (2.0 * step);
    report.focal_max_rel_err = std::max(
        report.focal_max_rel_err,
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-12}));
  }
  return report;
}

}  // namespace widepose
