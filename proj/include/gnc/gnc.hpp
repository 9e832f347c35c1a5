#pragma once

// Graduated non-convexity over any weighted least-squares solver.
//
// The robust problem  min_x sum_i rho(r_i(x))  is rewritten through its
// outlier process  min_{x, w} sum_i w_i r_i(x)^2 + Phi(w_i)  and solved by
// alternating a global weighted solve for x with a closed-form update of w,
// while mu morphs a convex surrogate of rho into rho itself.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gnc/robust_cost.hpp"

namespace gnc {

/// A problem GNC can drive. `solve_weighted` must return the global minimizer
/// of sum_i w_i r_i(x)^2; with unit weights it is the plain least-squares fit.
template <typename P>
concept WeightedProblem =
    requires(const P& problem, const Eigen::VectorXd& weights,
             const typename P::Estimate& estimate) {
      typename P::Estimate;
      { problem.size() } -> std::convertible_to<std::size_t>;
      { problem.residuals(estimate) } -> std::convertible_to<Eigen::VectorXd>;
      {
        problem.solve_weighted(weights)
      } -> std::convertible_to<typename P::Estimate>;
    };

struct GncConfig {
  RobustCostSpec cost;
  double mu_factor = 1.4;
  std::size_t max_outer_iterations = 1000;
  /// TLS stop: change of sum_i w_i r_i^2, relative to max(1, previous value).
  double cost_convergence_tol = 1e-6;
  /// Stop when no weight moves by more than this between outer iterations.
  double fixed_point_tol = 1e-6;
  bool record_trace = false;

  void validate() const {
    if (!(mu_factor > 1.0)) {
      throw std::invalid_argument("GncConfig: mu_factor must exceed 1");
    }
    if (max_outer_iterations == 0) {
      throw std::invalid_argument("GncConfig: max_outer_iterations must be positive");
    }
    if (!(cost_convergence_tol > 0.0) || !(fixed_point_tol > 0.0)) {
      throw std::invalid_argument("GncConfig: tolerances must be positive");
    }
    if (!(cost.c_bar > 0.0)) {
      throw std::invalid_argument("GncConfig: c_bar must be positive");
    }
  }
};

struct GncTraceEntry {
  double mu = 0.0;
  double weighted_residual_sum = 0.0;
  Eigen::VectorXd weights;
};

inline constexpr double kInlierWeightThreshold = 0.5;

template <typename Estimate>
struct GncResult {
  Estimate estimate;
  Eigen::VectorXd weights;
  std::vector<bool> inlier_mask;
  std::size_t outer_iterations = 0;
  bool converged = false;
  /// True when the unit-weight fit already explained every measurement.
  bool all_inliers_at_start = false;
  std::vector<GncTraceEntry> trace;

  std::size_t inlier_count() const {
    std::size_t n = 0;
    for (bool b : inlier_mask) n += b ? 1 : 0;
    return n;
  }
};

inline std::vector<bool> inlier_mask_from_weights(const Eigen::VectorXd& w) {
  std::vector<bool> mask(static_cast<std::size_t>(w.size()));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    mask[static_cast<std::size_t>(i)] = w[i] >= kInlierWeightThreshold;
  }
  return mask;
}

template <WeightedProblem Problem>
GncResult<typename Problem::Estimate> run_gnc(const Problem& problem,
                                              const GncConfig& config) {
  using Estimate = typename Problem::Estimate;
  config.validate();

  const auto n = static_cast<Eigen::Index>(problem.size());
  if (n == 0) {
    throw std::invalid_argument("run_gnc: problem has no measurements");
  }
  const CostKind kind = config.cost.kind;
  const double c_bar = config.cost.c_bar;

  Eigen::VectorXd weights = Eigen::VectorXd::Ones(n);
  Estimate estimate = problem.solve_weighted(weights);
  Eigen::VectorXd r_sq = Eigen::VectorXd(problem.residuals(estimate)).array().square();

  GncResult<Estimate> result{estimate, weights, {}, 0, false, false, {}};

  const auto mu0 = mu_init(kind, r_sq.maxCoeff(), c_bar);
  if (!mu0) {
    result.converged = true;
    result.all_inliers_at_start = true;
    result.inlier_mask = inlier_mask_from_weights(weights);
    return result;
  }

  double mu = *mu0;
  double prev_cost = std::numeric_limits<double>::infinity();
  Eigen::VectorXd next_weights(n);

  for (std::size_t it = 1; it <= config.max_outer_iterations; ++it) {
    if (it > 1) {
      estimate = problem.solve_weighted(weights);
      r_sq = Eigen::VectorXd(problem.residuals(estimate)).array().square();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      next_weights[i] = weight_update(kind, r_sq[i], mu, c_bar);
    }
    const double cost = next_weights.dot(r_sq);
    const double weight_change = (next_weights - weights).cwiseAbs().maxCoeff();
    weights = next_weights;
    result.outer_iterations = it;
    if (config.record_trace) {
      result.trace.push_back({mu, cost, weights});
    }

    if (kind == CostKind::TruncatedLS &&
        std::abs(cost - prev_cost) <
            config.cost_convergence_tol * std::max(1.0, prev_cost)) {
      result.converged = true;
      break;
    }
    if (weight_change < config.fixed_point_tol) {
      result.converged = true;
      break;
    }
    mu = mu_step(kind, mu, config.mu_factor);
    if (kind == CostKind::GemanMcClure && mu < 1.0) {
      result.converged = true;
      break;
    }
    prev_cost = cost;
  }

  result.estimate = std::move(estimate);
  result.weights = weights;
  result.inlier_mask = inlier_mask_from_weights(weights);
  return result;
}

}  // namespace gnc
