#pragma once

// RANSAC baseline: minimal-sample hypotheses, consensus scoring, adaptive
// stopping, and a final least-squares refit on the best consensus set.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gnc/errors.hpp"
#include "gnc/random.hpp"
#include "gnc/registration.hpp"
#include "gnc/shape_alignment.hpp"

namespace gnc {

struct RansacConfig {
  std::size_t max_iterations = 1000;
  double confidence = 0.99;
  /// Residuals strictly below this count as inliers.
  double inlier_threshold = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iterations == 0) {
      throw std::invalid_argument("RansacConfig: max_iterations must be positive");
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
      throw std::invalid_argument("RansacConfig: confidence must lie in (0, 1)");
    }
    if (!(inlier_threshold > 0.0)) {
      throw std::invalid_argument("RansacConfig: inlier_threshold must be positive");
    }
  }
};

template <typename Estimate>
struct RansacResult {
  Estimate estimate;
  std::vector<bool> inlier_mask;
  /// Sampling iterations only; the final refit is not counted.
  std::size_t iterations_used = 0;
  std::size_t consensus_size = 0;
};

/// Iterations needed to draw one all-inlier sample with the given confidence.
inline std::size_t ransac_required_iterations(double inlier_ratio,
                                              std::size_t sample_size,
                                              double confidence) {
  const double p_good = std::pow(inlier_ratio, static_cast<double>(sample_size));
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return std::numeric_limits<std::size_t>::max();
  const double n = std::ceil(std::log(1.0 - confidence) / std::log(1.0 - p_good));
  if (!(n < 1e18)) return std::numeric_limits<std::size_t>::max();
  return std::max<std::size_t>(1, static_cast<std::size_t>(n));
}

namespace detail {

inline std::vector<bool> threshold_mask(const Eigen::VectorXd& residuals, double threshold,
                                        std::size_t& count) {
  std::vector<bool> mask(static_cast<std::size_t>(residuals.size()));
  count = 0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const bool in = residuals[i] < threshold;
    mask[static_cast<std::size_t>(i)] = in;
    count += in ? 1 : 0;
  }
  return mask;
}

inline Eigen::VectorXd mask_to_weights(const std::vector<bool>& mask) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(mask.size()));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    w[static_cast<Eigen::Index>(i)] = mask[i] ? 1.0 : 0.0;
  }
  return w;
}

}  // namespace detail

/// Generic loop. `minimal(indices)` fits a hypothesis to a sample and may throw
/// gnc::Error for degenerate samples; `residuals(estimate)` scores it;
/// `refit(weights)` is the non-minimal solver applied to the 0/1 consensus
/// weights.
template <typename Estimate, typename MinimalFn, typename ResidualFn, typename RefitFn>
RansacResult<Estimate> ransac(std::size_t n, std::size_t sample_size,
                              const RansacConfig& config, MinimalFn&& minimal,
                              ResidualFn&& residuals, RefitFn&& refit) {
  config.validate();
  if (n < sample_size) {
    throw std::invalid_argument("ransac: fewer measurements than the sample size");
  }
  Rng rng(config.seed);
  std::optional<Estimate> best;
  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  std::size_t bound = config.max_iterations;
  std::size_t iterations = 0;

  while (iterations < std::min(bound, config.max_iterations)) {
    ++iterations;
    const std::vector<std::size_t> sample = rng.sample_distinct(n, sample_size);
    std::optional<Estimate> hypothesis;
    try {
      hypothesis = minimal(std::span<const std::size_t>(sample));
    } catch (const Error&) {
      continue;
    }
    std::size_t count = 0;
    std::vector<bool> mask =
        detail::threshold_mask(residuals(*hypothesis), config.inlier_threshold, count);
    if (count > best_count) {
      best_count = count;
      best = std::move(hypothesis);
      best_mask = std::move(mask);
      bound = ransac_required_iterations(
          static_cast<double>(count) / static_cast<double>(n), sample_size,
          config.confidence);
    }
  }

  if (!best || best_count < sample_size) {
    throw NoConsensus("ransac: best consensus set is smaller than a minimal sample");
  }

  RansacResult<Estimate> result{*best, best_mask, iterations, best_count};
  try {
    Estimate refined = refit(detail::mask_to_weights(best_mask));
    std::size_t refined_count = 0;
    std::vector<bool> refined_mask =
        detail::threshold_mask(residuals(refined), config.inlier_threshold, refined_count);
    if (refined_count >= best_count) {
      result.estimate = std::move(refined);
      result.inlier_mask = std::move(refined_mask);
      result.consensus_size = refined_count;
    }
  } catch (const Error&) {
    // Keep the best sampled hypothesis.
  }
  return result;
}

inline RansacConfig ransac_registration_defaults(double threshold, std::uint64_t seed) {
  return RansacConfig{1000, 0.99, threshold, seed};
}

inline RansacConfig ransac_shape_alignment_defaults(double threshold, std::uint64_t seed) {
  return RansacConfig{100, 0.99, threshold, seed};
}

inline RansacResult<RigidPose> ransac_registration(
    std::span<const PointCorrespondence> corrs, const RansacConfig& config) {
  if (corrs.size() < 3) {
    throw std::invalid_argument("ransac_registration: need at least 3 correspondences");
  }
  std::vector<PointCorrespondence> sample_buf(3);
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(3);
  return ransac<RigidPose>(
      corrs.size(), 3, config,
      [&](std::span<const std::size_t> idx) {
        for (std::size_t k = 0; k < 3; ++k) sample_buf[k] = corrs[idx[k]];
        return weighted_horn(sample_buf, unit);
      },
      [&](const RigidPose& pose) { return registration_residuals(corrs, pose); },
      [&](const Eigen::VectorXd& w) { return weighted_horn(corrs, w); });
}

inline RansacResult<WeakPerspectivePose> ransac_shape_alignment(
    std::span<const ShapeCorrespondence> corrs, const RansacConfig& config,
    std::size_t restarts = 16) {
  if (corrs.size() < 4) {
    throw std::invalid_argument("ransac_shape_alignment: need at least 4 correspondences");
  }
  std::vector<ShapeCorrespondence> sample_buf(4);
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(4);
  const MinimizeOptions options{restarts, mix_seed(config.seed)};
  return ransac<WeakPerspectivePose>(
      corrs.size(), 4, config,
      [&](std::span<const std::size_t> idx) {
        for (std::size_t k = 0; k < 4; ++k) sample_buf[k] = corrs[idx[k]];
        return solve_shape_alignment(sample_buf, unit, options);
      },
      [&](const WeakPerspectivePose& pose) { return shape_residuals(corrs, pose); },
      [&](const Eigen::VectorXd& w) { return solve_shape_alignment(corrs, w, options); });
}

}  // namespace gnc
