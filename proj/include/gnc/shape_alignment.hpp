#pragma once

// Weighted weak-perspective shape alignment.
//
//   min_{s > 0, R, t}  sum_i w_i |z_i - s Pi R B_i - t|^2
//
// The translation is eliminated in closed form, the rotation is written as a
// linear map of the degree-2 monomials of a unit quaternion, and the scale is
// absorbed by lifting to v = sqrt(s) q. What remains is an unconstrained
// quartic in four variables,
//
//   f(v) = [v]_2^T Q [v]_2 - 2 g^T [v]_2 + h,
//
// minimized here by multi-start damped Newton. Quaternions are (x, y, z, w),
// scalar last; vec/mat are column-major.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gnc/errors.hpp"
#include "gnc/random.hpp"

namespace gnc {

using Vector10d = Eigen::Matrix<double, 10, 1>;
using Matrix10d = Eigen::Matrix<double, 10, 10>;
using LiftMatrix = Eigen::Matrix<double, 9, 10>;

/// Non-unit quaternion v = sqrt(s) q, scalar last.
using QuatVec = Eigen::Vector4d;

struct ShapeCorrespondence {
  Eigen::Vector2d z;  // image feature
  Eigen::Vector3d B;  // model point
};

/// z ~ s Pi R B + t, with Pi dropping the depth coordinate.
struct WeakPerspectivePose {
  double s = 1.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector2d t = Eigen::Vector2d::Zero();

  Eigen::Vector2d project(const Eigen::Vector3d& B) const {
    return s * (R * B).head<2>() + t;
  }
};

/// Maps [q]_2 to vec(R) (column-major) for a unit quaternion q.
inline const LiftMatrix& quat_lift_matrix() {
  static const LiftMatrix A = [] {
    LiftMatrix m;
    // clang-format off
    m <<  1, -1, -1,  1,  0,  0,  0,  0,  0,  0,
          0,  0,  0,  0,  2,  0,  0,  0,  0,  2,
          0,  0,  0,  0,  0,  2,  0,  0, -2,  0,
          0,  0,  0,  0,  2,  0,  0,  0,  0, -2,
         -1,  1, -1,  1,  0,  0,  0,  0,  0,  0,
          0,  0,  0,  0,  0,  0,  2,  2,  0,  0,
          0,  0,  0,  0,  0,  2,  0,  0,  2,  0,
          0,  0,  0,  0,  0,  0, -2,  2,  0,  0,
         -1, -1,  1,  1,  0,  0,  0,  0,  0,  0;
    // clang-format on
    return m;
  }();
  return A;
}

/// (v1^2, v2^2, v3^2, v4^2, v1v2, v1v3, v1v4, v2v3, v2v4, v3v4).
inline Vector10d quat_monomials(const Eigen::Vector4d& v) {
  Vector10d m;
  m << v[0] * v[0], v[1] * v[1], v[2] * v[2], v[3] * v[3],  //
      v[0] * v[1], v[0] * v[2], v[0] * v[3],                 //
      v[1] * v[2], v[1] * v[3],                              //
      v[2] * v[3];
  return m;
}

/// mat(A [v]_2). For ||v||^2 = s this is s R(v / ||v||).
inline Eigen::Matrix3d lifted_rotation(const Eigen::Vector4d& v) {
  const Eigen::Matrix<double, 9, 1> r = quat_lift_matrix() * quat_monomials(v);
  return Eigen::Map<const Eigen::Matrix3d>(r.data());
}

inline Eigen::Matrix3d rotation_from_quat(const Eigen::Vector4d& q) {
  if (std::abs(q.norm() - 1.0) > 1e-9) {
    throw std::domain_error("rotation_from_quat: quaternion must have unit norm");
  }
  return lifted_rotation(q);
}

/// Inverse of rotation_from_quat, returning the representative with w >= 0.
inline Eigen::Vector4d quat_from_rotation(const Eigen::Matrix3d& R) {
  // Shepperd's method.
  const double tr = R.trace();
  Eigen::Vector4d q;
  if (tr > R(0, 0) && tr > R(1, 1) && tr > R(2, 2)) {
    const double w4 = 2.0 * std::sqrt(1.0 + tr);
    q << (R(2, 1) - R(1, 2)) / w4, (R(0, 2) - R(2, 0)) / w4, (R(1, 0) - R(0, 1)) / w4,
        0.25 * w4;
  } else if (R(0, 0) >= R(1, 1) && R(0, 0) >= R(2, 2)) {
    const double x4 = 2.0 * std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2));
    q << 0.25 * x4, (R(0, 1) + R(1, 0)) / x4, (R(0, 2) + R(2, 0)) / x4,
        (R(2, 1) - R(1, 2)) / x4;
  } else if (R(1, 1) >= R(2, 2)) {
    const double y4 = 2.0 * std::sqrt(1.0 - R(0, 0) + R(1, 1) - R(2, 2));
    q << (R(0, 1) + R(1, 0)) / y4, 0.25 * y4, (R(1, 2) + R(2, 1)) / y4,
        (R(0, 2) - R(2, 0)) / y4;
  } else {
    const double z4 = 2.0 * std::sqrt(1.0 - R(0, 0) - R(1, 1) + R(2, 2));
    q << (R(0, 2) + R(2, 0)) / z4, (R(1, 2) + R(2, 1)) / z4, 0.25 * z4,
        (R(1, 0) - R(0, 1)) / z4;
  }
  q.normalize();
  if (q[3] < 0.0) q = -q;
  return q;
}

// ---------------------------------------------------------------------------
// Translation elimination.

struct MarginalizedShape {
  std::vector<Eigen::Vector2d> z_tilde;
  std::vector<Eigen::Vector3d> B_tilde;
  Eigen::Vector2d z_bar = Eigen::Vector2d::Zero();
  Eigen::Vector3d B_bar = Eigen::Vector3d::Zero();
};

/// Weighted centroids and sqrt(w)-scaled centered points.
inline MarginalizedShape marginalize_translation(
    std::span<const ShapeCorrespondence> corrs,
    const Eigen::Ref<const Eigen::VectorXd>& weights) {
  if (static_cast<Eigen::Index>(corrs.size()) != weights.size()) {
    throw std::invalid_argument("marginalize_translation: weights size mismatch");
  }
  double total = 0.0;
  MarginalizedShape out;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double w = weights[static_cast<Eigen::Index>(i)];
    if (w < 0.0) throw std::invalid_argument("marginalize_translation: negative weight");
    total += w;
    out.z_bar += w * corrs[i].z;
    out.B_bar += w * corrs[i].B;
  }
  if (!(total > 0.0)) {
    throw DegenerateConfiguration("marginalize_translation: total weight is zero");
  }
  out.z_bar /= total;
  out.B_bar /= total;
  out.z_tilde.reserve(corrs.size());
  out.B_tilde.reserve(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double sw = std::sqrt(weights[static_cast<Eigen::Index>(i)]);
    out.z_tilde.push_back(sw * (corrs[i].z - out.z_bar));
    out.B_tilde.push_back(sw * (corrs[i].B - out.B_bar));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quartic form.

struct QghForm {
  Matrix10d Q = Matrix10d::Zero();
  Vector10d g = Vector10d::Zero();
  double h = 0.0;
  /// Centroids for translation recovery.
  Eigen::Vector2d z_bar = Eigen::Vector2d::Zero();
  Eigen::Vector3d B_bar = Eigen::Vector3d::Zero();
  /// sum_i |Pi B~_i|^2, used to seed the scale of the minimizer's starts.
  double model_spread = 0.0;
};

inline QghForm build_qgh(std::span<const Eigen::Vector2d> z_tilde,
                         std::span<const Eigen::Vector3d> B_tilde) {
  if (z_tilde.size() != B_tilde.size() || z_tilde.empty()) {
    throw std::invalid_argument("build_qgh: need equal, non-empty point lists");
  }
  // sum_i B~ B~^T (x) Pi^T Pi with Pi^T Pi = diag(1, 1, 0); and
  // sum_i vec(Pi^T z~ B~^T).
  Eigen::Matrix3d BBt = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 9, 1> zb = Eigen::Matrix<double, 9, 1>::Zero();
  QghForm form;
  for (std::size_t i = 0; i < z_tilde.size(); ++i) {
    const Eigen::Vector3d& B = B_tilde[i];
    const Eigen::Vector2d& z = z_tilde[i];
    BBt += B * B.transpose();
    for (int col = 0; col < 3; ++col) {
      zb[3 * col + 0] += z[0] * B[col];
      zb[3 * col + 1] += z[1] * B[col];
    }
    form.h += z.squaredNorm();
    form.model_spread += B.head<2>().squaredNorm();
  }
  Eigen::Matrix<double, 9, 9> K = Eigen::Matrix<double, 9, 9>::Zero();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      K(3 * a + 0, 3 * b + 0) = BBt(a, b);
      K(3 * a + 1, 3 * b + 1) = BBt(a, b);
    }
  }
  const LiftMatrix& A = quat_lift_matrix();
  form.Q = A.transpose() * K * A;
  form.Q = 0.5 * (form.Q + form.Q.transpose()).eval();
  form.g = A.transpose() * zb;
  return form;
}

inline QghForm build_qgh(const MarginalizedShape& data) {
  QghForm form = build_qgh(data.z_tilde, data.B_tilde);
  form.z_bar = data.z_bar;
  form.B_bar = data.B_bar;
  return form;
}

inline double objective_f(const QghForm& form, const Eigen::Vector4d& v) {
  const Vector10d m = quat_monomials(v);
  return m.dot(form.Q * m) - 2.0 * form.g.dot(m) + form.h;
}

namespace detail {

/// d[v]_2 / dv, 10 x 4.
inline Eigen::Matrix<double, 10, 4> monomial_jacobian(const Eigen::Vector4d& v) {
  Eigen::Matrix<double, 10, 4> J = Eigen::Matrix<double, 10, 4>::Zero();
  for (int i = 0; i < 4; ++i) J(i, i) = 2.0 * v[i];
  int row = 4;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j, ++row) {
      J(row, i) = v[j];
      J(row, j) = v[i];
    }
  }
  return J;
}

struct LocalModel {
  double f;
  Eigen::Vector4d grad;
  Eigen::Matrix4d hess;
};

inline LocalModel local_model(const QghForm& form, const Eigen::Vector4d& v) {
  const Vector10d m = quat_monomials(v);
  const Vector10d Qm = form.Q * m;
  const Vector10d c = 2.0 * (Qm - form.g);
  const Eigen::Matrix<double, 10, 4> J = monomial_jacobian(v);
  LocalModel out;
  out.f = m.dot(Qm) - 2.0 * form.g.dot(m) + form.h;
  out.grad = J.transpose() * c;
  out.hess = 2.0 * J.transpose() * form.Q * J;
  for (int i = 0; i < 4; ++i) out.hess(i, i) += 2.0 * c[i];
  int row = 4;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j, ++row) {
      out.hess(i, j) += c[row];
      out.hess(j, i) += c[row];
    }
  }
  return out;
}

}  // namespace detail

inline Eigen::Vector4d gradient_f(const QghForm& form, const Eigen::Vector4d& v) {
  return detail::local_model(form, v).grad;
}

struct LocalMinimum {
  Eigen::Vector4d v = Eigen::Vector4d::Zero();
  double f = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool gradient_converged = false;
};

inline constexpr std::size_t kMaxLocalIterations = 500;
inline constexpr double kGradientTolerance = 1e-10;

/// Levenberg-damped Newton from `start`. Stops on a small gradient, after
/// kMaxLocalIterations, or when no damped step decreases f any more.
inline LocalMinimum local_minimize_f(const QghForm& form, Eigen::Vector4d start) {
  LocalMinimum out;
  out.v = start;
  detail::LocalModel model = detail::local_model(form, out.v);
  if (!std::isfinite(model.f)) return out;

  double lambda = 1e-6 * std::max(1.0, model.hess.diagonal().cwiseAbs().maxCoeff());
  for (; out.iterations < kMaxLocalIterations; ++out.iterations) {
    if (model.grad.norm() < kGradientTolerance * std::max(1.0, model.f)) {
      out.gradient_converged = true;
      break;
    }
    const double hess_scale = std::max(1e-300, model.hess.cwiseAbs().maxCoeff());
    bool accepted = false;
    while (lambda < 1e20 * hess_scale) {
      const Eigen::Matrix4d damped = model.hess + lambda * Eigen::Matrix4d::Identity();
      Eigen::LLT<Eigen::Matrix4d> llt(damped);
      if (llt.info() == Eigen::Success) {
        const Eigen::Vector4d candidate = out.v - llt.solve(model.grad);
        const double f_candidate = objective_f(form, candidate);
        if (std::isfinite(f_candidate) && f_candidate < model.f) {
          out.v = candidate;
          model = detail::local_model(form, out.v);
          lambda = std::max(lambda / 4.0, 1e-15 * hess_scale);
          accepted = true;
          break;
        }
      }
      lambda = std::max(lambda * 4.0, 1e-12 * hess_scale);
    }
    if (!accepted) break;
  }
  out.f = model.f;
  return out;
}

/// Twelve fixed, pairwise distinct rotations: the four coordinate axes of
/// S^3 and the eight (+-1, +-1, +-1, 1) / 2 corners.
inline const std::array<Eigen::Vector4d, 12>& fixed_quaternion_starts() {
  static const std::array<Eigen::Vector4d, 12> starts = [] {
    std::array<Eigen::Vector4d, 12> s;
    for (int i = 0; i < 4; ++i) s[i] = Eigen::Vector4d::Unit(i);
    int k = 4;
    for (int sx : {1, -1}) {
      for (int sy : {1, -1}) {
        for (int sz : {1, -1}) {
          s[k++] = 0.5 * Eigen::Vector4d(sx, sy, sz, 1.0);
        }
      }
    }
    return s;
  }();
  return starts;
}

/// sqrt(sum |z~|^2 / sum |Pi B~|^2), or 1 when that is not a usable number.
inline double initial_scale(const QghForm& form) {
  const double s = std::sqrt(form.h / form.model_spread);
  return std::isfinite(s) && s > 0.0 ? s : 1.0;
}

struct MinimizeOptions {
  std::size_t restarts = 16;
  std::uint64_t seed = 0;
};

/// All local runs of the multi-start search, in start order: the fixed starts
/// first, then the seeded random ones. Each start is scaled so ||v||^2 equals
/// the initial scale estimate.
inline std::vector<LocalMinimum> minimize_f_runs(const QghForm& form,
                                                 const MinimizeOptions& options) {
  const double radius = std::sqrt(initial_scale(form));
  std::vector<LocalMinimum> runs;
  runs.reserve(12 + options.restarts);
  for (const auto& q : fixed_quaternion_starts()) {
    runs.push_back(local_minimize_f(form, radius * q));
  }
  Rng rng(options.seed);
  for (std::size_t i = 0; i < options.restarts; ++i) {
    runs.push_back(local_minimize_f(form, radius * rng.unit_quaternion()));
  }
  return runs;
}

/// Lowest-f run; ties go to the earliest start.
inline QuatVec minimize_f(const QghForm& form, const MinimizeOptions& options = {}) {
  const std::vector<LocalMinimum> runs = minimize_f_runs(form, options);
  const LocalMinimum* best = nullptr;
  for (const auto& run : runs) {
    if (!std::isfinite(run.f)) continue;
    if (best == nullptr || run.f < best->f) best = &run;
  }
  if (best == nullptr) {
    throw OptimizationFailed("minimize_f: every local run diverged");
  }
  return best->v;
}

inline QuatVec minimize_f(const QghForm& form, std::size_t restarts, std::uint64_t seed) {
  return minimize_f(form, MinimizeOptions{restarts, seed});
}

inline constexpr double kMinLiftedNorm = 1e-9;

inline WeakPerspectivePose recover_pose(const QghForm& form, const QuatVec& v) {
  const double norm = v.norm();
  if (!(norm > kMinLiftedNorm)) {
    throw DegenerateScale("recover_pose: lifted quaternion is (numerically) zero");
  }
  WeakPerspectivePose pose;
  pose.s = norm * norm;
  pose.R = rotation_from_quat(v / norm);
  pose.t = form.z_bar - pose.s * (pose.R * form.B_bar).head<2>();
  return pose;
}

inline Eigen::VectorXd shape_residuals(std::span<const ShapeCorrespondence> corrs,
                                       const WeakPerspectivePose& pose) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(corrs.size()));
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    r[static_cast<Eigen::Index>(i)] = (corrs[i].z - pose.project(corrs[i].B)).norm();
  }
  return r;
}

/// Full weighted solver: marginalize, lift, minimize, recover.
inline WeakPerspectivePose solve_shape_alignment(
    std::span<const ShapeCorrespondence> corrs,
    const Eigen::Ref<const Eigen::VectorXd>& weights,
    const MinimizeOptions& options = {}) {
  const MarginalizedShape data = marginalize_translation(corrs, weights);
  double spread = 0.0;
  for (const auto& B : data.B_tilde) spread += B.squaredNorm();
  if (!(spread > 0.0)) {
    throw DegenerateConfiguration(
        "solve_shape_alignment: weighted model points are coincident");
  }
  const QghForm form = build_qgh(data);
  return recover_pose(form, minimize_f(form, options));
}

/// GNC adapter; borrows the correspondences. Every variable update reuses the
/// same seed so runs are reproducible.
class ShapeAlignmentProblem {
 public:
  using Estimate = WeakPerspectivePose;

  explicit ShapeAlignmentProblem(std::span<const ShapeCorrespondence> corrs,
                                 MinimizeOptions options = {})
      : corrs_(corrs), options_(options) {}

  std::size_t size() const { return corrs_.size(); }

  Eigen::VectorXd residuals(const WeakPerspectivePose& pose) const {
    return shape_residuals(corrs_, pose);
  }

  WeakPerspectivePose solve_weighted(const Eigen::VectorXd& weights) const {
    return solve_shape_alignment(corrs_, weights, options_);
  }

 private:
  std::span<const ShapeCorrespondence> corrs_;
  MinimizeOptions options_;
};

}  // namespace gnc
