#pragma once

// Seeded benchmark instances and pose error metrics.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnc/ply.hpp"
#include "gnc/random.hpp"
#include "gnc/registration.hpp"
#include "gnc/shape_alignment.hpp"

namespace gnc {

struct RegistrationInstanceSpec {
  std::size_t n = 100;
  double sigma = 0.01;
  double outlier_rate = 0.0;
  std::uint64_t seed = 0;
  /// Source cloud; random points in the unit cube when empty.
  std::optional<std::string> ply_path;

  void validate() const {
    if (n == 0) throw std::invalid_argument("instance spec: n must be positive");
    if (!(sigma >= 0.0)) throw std::invalid_argument("instance spec: sigma must be >= 0");
    if (!(outlier_rate >= 0.0 && outlier_rate < 1.0)) {
      throw std::invalid_argument("instance spec: outlier_rate must lie in [0, 1)");
    }
  }
};

struct ShapeInstanceSpec {
  std::size_t n = 50;
  double sigma = 0.01;
  double outlier_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    RegistrationInstanceSpec{n, sigma, outlier_rate, seed, std::nullopt}.validate();
  }
};

template <typename Correspondence, typename Pose>
struct GeneratedInstance {
  std::vector<Correspondence> correspondences;
  Pose ground_truth;
  std::vector<bool> outlier_mask;

  std::size_t outlier_count() const {
    return static_cast<std::size_t>(std::count(outlier_mask.begin(), outlier_mask.end(), true));
  }
};

using RegistrationInstance = GeneratedInstance<PointCorrespondence, RigidPose>;
using ShapeInstance = GeneratedInstance<ShapeCorrespondence, WeakPerspectivePose>;

inline std::size_t outlier_count_for(std::size_t n, double rate) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

/// Translates and uniformly scales so the bounding box starts at the origin
/// and its longest side is 1.
inline void normalize_to_unit_cube(std::vector<Eigen::Vector3d>& points) {
  if (points.empty()) return;
  Eigen::Vector3d lo = points.front();
  Eigen::Vector3d hi = points.front();
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).maxCoeff();
  const double scale = extent > 0.0 ? 1.0 / extent : 1.0;
  for (auto& p : points) p = (p - lo) * scale;
}

/// Outlier indices: a seeded random subset of size round(rate * n).
inline std::vector<bool> draw_outlier_mask(Rng& rng, std::size_t n, double rate) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<bool> mask(n, false);
  const std::size_t count = outlier_count_for(n, rate);
  for (std::size_t k = 0; k < count; ++k) mask[order[k]] = true;
  return mask;
}

/// Source points in the unit cube, a random rigid motion, Gaussian noise on
/// inlier targets, and outlier targets redrawn uniformly in the bounding box
/// of the transformed cloud.
inline RegistrationInstance generate_registration(const RegistrationInstanceSpec& spec,
                                                  std::vector<Eigen::Vector3d> cloud = {}) {
  spec.validate();
  if (cloud.empty() && spec.ply_path) cloud = load_ply_points(*spec.ply_path);
  Rng rng(spec.seed);

  std::vector<Eigen::Vector3d> source;
  source.reserve(spec.n);
  if (cloud.empty()) {
    for (std::size_t i = 0; i < spec.n; ++i) source.push_back(rng.uniform3(0.0, 1.0));
    normalize_to_unit_cube(source);
  } else {
    normalize_to_unit_cube(cloud);
    if (cloud.size() >= spec.n) {
      for (std::size_t idx : rng.sample_distinct(cloud.size(), spec.n)) {
        source.push_back(cloud[idx]);
      }
    } else {
      for (std::size_t i = 0; i < spec.n; ++i) {
        source.push_back(cloud[static_cast<std::size_t>(rng.index(cloud.size()))]);
      }
    }
  }

  RegistrationInstance inst;
  inst.ground_truth.R = rng.rotation();
  inst.ground_truth.t = rng.uniform3(-1.0, 1.0);
  inst.correspondences.reserve(spec.n);
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (const auto& a : source) {
    const Eigen::Vector3d b = inst.ground_truth(a) + rng.normal3(spec.sigma);
    lo = lo.cwiseMin(b);
    hi = hi.cwiseMax(b);
    inst.correspondences.push_back({a, b});
  }
  inst.outlier_mask = draw_outlier_mask(rng, spec.n, spec.outlier_rate);
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (!inst.outlier_mask[i]) continue;
    Eigen::Vector3d b;
    for (int k = 0; k < 3; ++k) b[k] = rng.uniform(lo[k], hi[k]);
    inst.correspondences[i].b = b;
  }
  return inst;
}

/// Model points in [-1, 1]^3 seen by a random weak-perspective camera.
/// Outliers are wrong correspondences: the feature of a different model point.
inline ShapeInstance generate_shape_alignment(const ShapeInstanceSpec& spec) {
  spec.validate();
  if (spec.n < 2 && spec.outlier_rate > 0.0) {
    throw std::invalid_argument("generate_shape_alignment: outliers need n >= 2");
  }
  Rng rng(spec.seed);
  std::vector<Eigen::Vector3d> model;
  model.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) model.push_back(rng.uniform3(-1.0, 1.0));

  ShapeInstance inst;
  inst.ground_truth.s = rng.uniform(0.5, 2.0);
  inst.ground_truth.R = rng.rotation();
  const double tx = rng.uniform(-1.0, 1.0);
  const double ty = rng.uniform(-1.0, 1.0);
  inst.ground_truth.t = Eigen::Vector2d(tx, ty);

  auto noisy_projection = [&](const Eigen::Vector3d& B) {
    const double nx = rng.normal();
    const double ny = rng.normal();
    return Eigen::Vector2d(inst.ground_truth.project(B) + spec.sigma * Eigen::Vector2d(nx, ny));
  };

  inst.correspondences.reserve(spec.n);
  for (const auto& B : model) inst.correspondences.push_back({noisy_projection(B), B});
  inst.outlier_mask = draw_outlier_mask(rng, spec.n, spec.outlier_rate);
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (!inst.outlier_mask[i]) continue;
    std::size_t j = static_cast<std::size_t>(rng.index(spec.n - 1));
    if (j >= i) ++j;
    inst.correspondences[i].z = noisy_projection(model[j]);
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Metrics.

/// Geodesic angle of R_gt^T R_est, in degrees. Same value as
/// acos((trace - 1) / 2) but evaluated with atan2 so small angles keep their
/// precision.
inline double rotation_error_deg(const Eigen::Matrix3d& R_est, const Eigen::Matrix3d& R_gt) {
  const Eigen::Matrix3d M = R_gt.transpose() * R_est;
  const Eigen::Vector3d axis(M(2, 1) - M(1, 2), M(0, 2) - M(2, 0), M(1, 0) - M(0, 1));
  const double c = std::clamp((M.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::atan2(0.5 * axis.norm(), c) * 180.0 / std::numbers::pi;
}

struct ErrorMetrics {
  double rotation_error_deg = 0.0;
  double translation_error = 0.0;
  std::optional<double> scale_error;  // relative; shape alignment only
};

inline ErrorMetrics pose_errors(const RigidPose& est, const RigidPose& gt) {
  return {rotation_error_deg(est.R, gt.R), (est.t - gt.t).norm(), std::nullopt};
}

inline ErrorMetrics pose_errors(const WeakPerspectivePose& est, const WeakPerspectivePose& gt) {
  return {rotation_error_deg(est.R, gt.R), (est.t - gt.t).norm(),
          std::abs(est.s - gt.s) / gt.s};
}

}  // namespace gnc
