#include "widepose/pnp.hpp"

#include "widepose/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace widepose {

namespace {

using Mat34 = Eigen::Matrix<double, 3, 4>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

constexpr double kMaxCondition = 1e12;
constexpr int kDltMinPoints = 6;

}  // namespace

void RansacParams::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "RANSAC needs >= 1 iteration");
  if (!(inlier_threshold_px > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "inlier threshold must be positive");
  }
  if (min_sample_size < 4) throw Error(ErrorCode::kInvalidArgument, "minimal sample size is 4");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence must lie in (0, 1)");
  }
}

double reprojection_error(const CameraIntrinsics& K, const Pose& pose, const Correspondence& c) {
  const Vec3 xc = pose.apply(c.model);
  if (!(xc.z() > kDepthEpsilon)) return std::numeric_limits<double>::infinity();
  return (project_camera_point(K, xc) - c.image).norm();
}

double reprojection_cost(const CameraIntrinsics& K, const Pose& pose,
                         std::span<const Correspondence> corrs) {
  double cost = 0.0;
  for (const auto& c : corrs) {
    const double e = reprojection_error(K, pose, c);
    if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
    cost += c.weight * e * e;
  }
  return cost;
}

Pose pnp_dlt(std::span<const Correspondence> corrs, const CameraIntrinsics& K) {
  K.validate();
  const std::size_t n = corrs.size();
  if (n < kDltMinPoints) {
    throw Error(ErrorCode::kDegenerateConfiguration, "DLT needs at least 6 correspondences");
  }

  // Normalized camera coordinates, then isotropic scaling of both point sets.
  std::vector<Vec2> x(n);
  Vec2 c2 = Vec2::Zero();
  Vec3 c3 = Vec3::Zero();
  double wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 ray = backproject_ray(K, corrs[i].image);
    x[i] = ray.head<2>();
    c2 += x[i];
    c3 += corrs[i].model;
    wsum += corrs[i].weight;
  }
  if (!(wsum > 0.0)) throw Error(ErrorCode::kDegenerateConfiguration, "all weights are zero");
  c2 /= static_cast<double>(n);
  c3 /= static_cast<double>(n);

  Eigen::Matrix2d cov2 = Eigen::Matrix2d::Zero();
  double s2 = 0.0, s3 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 d = x[i] - c2;
    cov2 += d * d.transpose();
    s2 += d.norm();
    s3 += (corrs[i].model - c3).norm();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig2(cov2);
  if (!(eig2.eigenvalues()(1) > 0.0) || eig2.eigenvalues()(0) <= 1e-12 * eig2.eigenvalues()(1)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "image points are collinear");
  }
  s2 = std::sqrt(2.0) * n / s2;
  s3 = std::sqrt(3.0) * n / s3;

  Eigen::MatrixXd A(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::sqrt(corrs[i].weight);
    Vec4 X;
    X << s3 * (corrs[i].model - c3), 1.0;
    const Vec2 xn = s2 * (x[i] - c2);
    A.row(2 * i) << w * X.transpose(), Eigen::RowVector4d::Zero(), -w * xn.x() * X.transpose();
    A.row(2 * i + 1) << Eigen::RowVector4d::Zero(), w * X.transpose(), -w * xn.y() * X.transpose();
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(10) <= sv(0) / kMaxCondition) {
    throw Error(ErrorCode::kDegenerateConfiguration, "DLT design matrix is rank deficient");
  }
  const Eigen::Matrix<double, 12, 1> p = svd.matrixV().col(11);
  Mat34 Pn;
  Pn << p.segment<4>(0).transpose(), p.segment<4>(4).transpose(), p.segment<4>(8).transpose();

  // Undo the normalizations: x = T2^-1 Pn T3 X.
  Eigen::Matrix3d T2inv = Eigen::Matrix3d::Identity();
  T2inv(0, 0) = T2inv(1, 1) = 1.0 / s2;
  T2inv.block<2, 1>(0, 2) = c2;
  Eigen::Matrix4d T3 = Eigen::Matrix4d::Identity();
  T3.block<3, 3>(0, 0) *= s3;
  T3.block<3, 1>(0, 3) = -s3 * c3;
  Mat34 P = T2inv * Pn * T3;

  double mean_depth = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_depth += P.row(2).dot(corrs[i].model.homogeneous());
  if (mean_depth < 0.0) P = -P;

  const Mat3 M = P.leftCols<3>();
  const Eigen::JacobiSVD<Mat3> msvd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (msvd.matrixU() * msvd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 R = msvd.matrixU() * D * msvd.matrixV().transpose();
  const double scale = msvd.singularValues().mean();
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kDegenerateConfiguration, "DLT produced a zero rotation block");
  }
  return Pose::from_matrix(R, P.col(3) / scale);
}

namespace {

// Residuals and Jacobian of the weighted pixel residuals; false if a point
// is behind the camera.
bool linearize(const CameraIntrinsics& K, const Pose& pose, std::span<const Correspondence> corrs,
               Mat6& H, Vec6& g, double& cost) {
  H.setZero();
  g.setZero();
  cost = 0.0;
  const Mat3 R = pose.rotation();
  for (const auto& c : corrs) {
    const Vec3 rp = R * c.model;
    const Vec3 X = rp + pose.translation();
    if (!(X.z() > kDepthEpsilon)) return false;
    const double iz = 1.0 / X.z();
    Eigen::Matrix<double, 2, 3> dpi;
    dpi << K.fx * iz, 0.0, -K.fx * X.x() * iz * iz, 0.0, K.fy * iz, -K.fy * X.y() * iz * iz;
    Eigen::Matrix<double, 2, 6> J;
    J.leftCols<3>() = -dpi * skew(rp);
    J.rightCols<3>() = dpi;
    const Vec2 r(K.fx * X.x() * iz + K.cx - c.image.x(), K.fy * X.y() * iz + K.cy - c.image.y());
    H += c.weight * J.transpose() * J;
    g += c.weight * J.transpose() * r;
    cost += c.weight * r.squaredNorm();
  }
  return true;
}

Pose apply_step(const Pose& pose, const Vec6& step) {
  const Mat3 R = rotation_from_vector(step.head<3>()) * pose.rotation();
  return Pose::from_matrix(R, pose.translation() + step.tail<3>());
}

}  // namespace

RefineResult pnp_refine(const Pose& initial, std::span<const Correspondence> corrs,
                        const CameraIntrinsics& K, const RefineOptions& options) {
  K.validate();
  RefineResult out;
  out.pose = initial;

  Mat6 H;
  Vec6 g;
  double cost = 0.0;
  if (!linearize(K, initial, corrs, H, g, cost)) {
    throw Error(ErrorCode::kNonPositiveDepth, "initial pose puts a model point behind the camera");
  }
  out.initial_cost = out.final_cost = cost;
  if (corrs.empty()) {
    out.converged = true;
    return out;
  }

  double damping = 0.0;
  int attempts = 0;
  while (attempts < options.max_iterations) {
    ++attempts;
    Mat6 A = H;
    A.diagonal() += damping * H.diagonal().cwiseMax(1e-12);
    Vec6 step = A.ldlt().solve(-g);
    if (!step.allFinite()) {
      step = A.completeOrthogonalDecomposition().solve(-g);
    }
    if (!step.allFinite() || step.norm() < options.tolerance) {
      out.converged = true;
      break;
    }

    // Step halving keeps every point in front of the camera.
    Pose candidate = apply_step(out.pose, step);
    double new_cost = reprojection_cost(K, candidate, corrs);
    for (int halvings = 0; !std::isfinite(new_cost) && halvings < 30; ++halvings) {
      step *= 0.5;
      candidate = apply_step(out.pose, step);
      new_cost = reprojection_cost(K, candidate, corrs);
    }

    if (std::isfinite(new_cost) && new_cost < cost) {
      Mat6 H_new;
      Vec6 g_new;
      double relinearized = 0.0;
      linearize(K, candidate, corrs, H_new, g_new, relinearized);
      out.pose = candidate;
      cost = relinearized;
      H = H_new;
      g = g_new;
      ++out.iterations;
      damping *= 0.1;
      if (damping < 1e-9) damping = 0.0;
    } else {
      damping = damping > 0.0 ? damping * 10.0 : 1e-4;
      if (damping > 1e12) {
        // No descent direction left at this precision: a stationary point.
        out.converged = true;
        break;
      }
    }
  }
  out.final_cost = cost;
  return out;
}

Pose solve_pnp(std::span<const Correspondence> corrs, const CameraIntrinsics& K) {
  return pnp_refine(pnp_dlt(corrs, K), corrs, K).pose;
}

namespace {

struct Consensus {
  std::vector<bool> flags;
  std::size_t count = 0;
};

Consensus score(const CameraIntrinsics& K, const Pose& pose, std::span<const Correspondence> corrs,
                double threshold) {
  Consensus out;
  out.flags.resize(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    out.flags[i] = reprojection_error(K, pose, corrs[i]) < threshold;
    out.count += out.flags[i] ? 1 : 0;
  }
  return out;
}

std::vector<Correspondence> gather(std::span<const Correspondence> corrs,
                                   const std::vector<bool>& flags) {
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (flags[i]) out.push_back(corrs[i]);
  }
  return out;
}

std::size_t count_distinct_models(std::span<const Correspondence> corrs) {
  std::vector<Keypoint3D> seen;
  for (const auto& c : corrs) {
    if (std::none_of(seen.begin(), seen.end(), [&](const Keypoint3D& p) { return p == c.model; })) {
      seen.push_back(c.model);
    }
  }
  return seen.size();
}

// Uniform sample of `size` correspondences with pairwise distinct model
// points. Returns false if the draw budget runs out.
bool draw_sample(std::span<const Correspondence> corrs, std::size_t size, std::mt19937_64& rng,
                 std::vector<std::size_t>& out) {
  out.clear();
  std::uniform_int_distribution<std::size_t> pick(0, corrs.size() - 1);
  int budget = static_cast<int>(50 * size);
  while (out.size() < size && budget-- > 0) {
    const std::size_t idx = pick(rng);
    const bool clash = std::any_of(out.begin(), out.end(), [&](std::size_t j) {
      return j == idx || corrs[j].model == corrs[idx].model;
    });
    if (!clash) out.push_back(idx);
  }
  return out.size() == size;
}

// Fronto-parallel guess used when too few points are available for DLT.
Pose coarse_initial_pose(std::span<const Correspondence> corrs, const CameraIntrinsics& K,
                         std::mt19937_64& rng) {
  Vec3 c3 = Vec3::Zero();
  Vec2 c2 = Vec2::Zero();
  for (const auto& c : corrs) {
    c3 += c.model;
    c2 += c.image;
  }
  c3 /= static_cast<double>(corrs.size());
  c2 /= static_cast<double>(corrs.size());
  double spread3 = 0.0, spread2 = 0.0;
  for (const auto& c : corrs) {
    spread3 += (c.model - c3).squaredNorm();
    spread2 += (c.image - c2).squaredNorm();
  }
  const double f = 0.5 * (K.fx + K.fy);
  const double depth = spread2 > 0.0 ? f * std::sqrt(spread3 / spread2) : 1.0;
  const Eigen::Quaterniond q = random_rotation(rng);
  const Vec3 center = depth * backproject_ray(K, c2);
  return Pose(q, center - (q * c3));
}

std::size_t required_iterations(double inlier_ratio, std::size_t sample_size, double confidence,
                                std::size_t cap) {
  const double p_good = std::pow(inlier_ratio, static_cast<double>(sample_size));
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return cap;
  const double n = std::log(1.0 - confidence) / std::log(1.0 - p_good);
  if (!std::isfinite(n) || n >= static_cast<double>(cap)) return cap;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(n)));
}

}  // namespace

PnpResult pnp_ransac(std::span<const Correspondence> corrs, const CameraIntrinsics& K,
                     const RansacParams& params) {
  params.validate();
  K.validate();
  const std::size_t min_size = static_cast<std::size_t>(params.min_sample_size);
  if (corrs.size() < min_size) {
    throw Error(ErrorCode::kNoConsensus, "fewer correspondences than the minimal sample size");
  }

  const bool use_dlt = corrs.size() >= kDltMinPoints && count_distinct_models(corrs) >= kDltMinPoints;
  const std::size_t sample_size = use_dlt ? std::max<std::size_t>(kDltMinPoints, min_size) : min_size;
  const std::size_t cap = static_cast<std::size_t>(params.max_iterations);
  const RefineOptions minimal_refine{10, 1e-10};

  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> sample;
  std::vector<Correspondence> subset;

  bool have_best = false;
  Pose best_pose;
  Consensus best;
  std::size_t needed = cap;
  std::size_t it = 0;
  for (; it < needed; ++it) {
    if (!draw_sample(corrs, sample_size, rng, sample)) continue;
    subset.clear();
    for (std::size_t idx : sample) subset.push_back(corrs[idx]);

    Pose hypothesis;
    try {
      const Pose init = use_dlt ? pnp_dlt(subset, K)
                                : (have_best ? best_pose : coarse_initial_pose(subset, K, rng));
      hypothesis = pnp_refine(init, subset, K, minimal_refine).pose;
    } catch (const Error&) {
      continue;
    }

    Consensus c = score(K, hypothesis, corrs, params.inlier_threshold_px);
    if (c.count > best.count) {
      best = std::move(c);
      best_pose = hypothesis;
      have_best = true;
      needed = std::min(cap, required_iterations(static_cast<double>(best.count) / corrs.size(),
                                                 sample_size, params.confidence, cap));
    }
  }

  if (!have_best || best.count < min_size) {
    throw Error(ErrorCode::kNoConsensus, "no hypothesis reached the minimal inlier count");
  }

  // Refit on the consensus set; repeat while the set keeps changing.
  Pose pose = best_pose;
  Consensus consensus = best;
  for (int round = 0; round < 3; ++round) {
    const std::vector<Correspondence> inliers = gather(corrs, consensus.flags);
    Pose refined;
    try {
      refined = pnp_refine(pose, inliers, K).pose;
    } catch (const Error&) {
      break;
    }
    Consensus next = score(K, refined, corrs, params.inlier_threshold_px);
    if (next.count < min_size) break;
    const bool same = next.flags == consensus.flags;
    pose = refined;
    consensus = std::move(next);
    if (same) break;
  }

  PnpResult out;
  out.pose = pose;
  out.inliers = consensus.flags;
  out.inlier_count = consensus.count;
  out.hypotheses = static_cast<int>(it);
  double sum = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (consensus.flags[i]) sum += reprojection_error(K, pose, corrs[i]);
  }
  out.mean_reprojection_error_px = consensus.count > 0 ? sum / consensus.count : 0.0;
  return out;
}

}  // namespace widepose
