#pragma once

// Weighted closed-form point-to-point registration and its GNC adapter.

#include <Eigen/Core>
#include <Eigen/SVD>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gnc/errors.hpp"

namespace gnc {

struct PointCorrespondence {
  Eigen::Vector3d a;  // source
  Eigen::Vector3d b;  // target
};

/// b ~ R a + t.
struct RigidPose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d operator()(const Eigen::Vector3d& p) const { return R * p + t; }
};

inline constexpr double kHornDegeneracyRatio = 1e-12;

/// Global minimizer of sum_i w_i |b_i - R a_i - t|^2 over SO(3) x R^3.
/// Weighted centroids, weighted cross-covariance, SVD, reflection fix.
/// Throws DegenerateConfiguration when the weighted points do not pin down a
/// rotation (zero total weight, coincident or collinear points).
inline RigidPose weighted_horn(std::span<const PointCorrespondence> corrs,
                               const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (static_cast<Eigen::Index>(corrs.size()) != weights.size()) {
    throw std::invalid_argument("weighted_horn: weights size mismatch");
  }
  if (corrs.size() < 3) {
    throw DegenerateConfiguration("weighted_horn: need at least 3 correspondences");
  }
  double total = 0.0;
  Eigen::Vector3d a_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d b_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double w = weights[static_cast<Eigen::Index>(i)];
    if (w < 0.0) throw std::invalid_argument("weighted_horn: negative weight");
    total += w;
    a_mean += w * corrs[i].a;
    b_mean += w * corrs[i].b;
  }
  if (!(total > 0.0)) {
    throw DegenerateConfiguration("weighted_horn: total weight is zero");
  }
  a_mean /= total;
  b_mean /= total;

  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double w = weights[static_cast<Eigen::Index>(i)];
    if (w == 0.0) continue;
    H += w * (corrs[i].a - a_mean) * (corrs[i].b - b_mean).transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] < kHornDegeneracyRatio * sv[0]) {
    throw DegenerateConfiguration(
        "weighted_horn: weighted points are coincident or collinear");
  }
  const Eigen::Matrix3d& U = svd.matrixU();
  const Eigen::Matrix3d& V = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (V * U.transpose()).determinant() < 0.0 ? -1.0 : 1.0);

  RigidPose pose;
  pose.R = V * d.asDiagonal() * U.transpose();
  pose.t = b_mean - pose.R * a_mean;
  return pose;
}

inline Eigen::VectorXd registration_residuals(std::span<const PointCorrespondence> corrs,
                                              const RigidPose& pose) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(corrs.size()));
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    r[static_cast<Eigen::Index>(i)] = (corrs[i].b - pose(corrs[i].a)).norm();
  }
  return r;
}

/// GNC adapter; borrows the correspondences.
class RegistrationProblem {
 public:
  using Estimate = RigidPose;

  explicit RegistrationProblem(std::span<const PointCorrespondence> corrs)
      : corrs_(corrs) {}

  std::size_t size() const { return corrs_.size(); }

  Eigen::VectorXd residuals(const RigidPose& pose) const {
    return registration_residuals(corrs_, pose);
  }

  RigidPose solve_weighted(const Eigen::VectorXd& weights) const {
    return weighted_horn(corrs_, weights);
  }

 private:
  std::span<const PointCorrespondence> corrs_;
};

}  // namespace gnc
