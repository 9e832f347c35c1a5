#pragma once

// Geman-McClure and truncated least squares costs, their graduated
// surrogates, the matching outlier-process penalties and the closed-form
// weight updates that minimize w * r^2 + penalty(w) over w.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string_view>

namespace gnc {

enum class CostKind { GemanMcClure, TruncatedLS };

inline std::string_view to_string(CostKind kind) {
  return kind == CostKind::GemanMcClure ? "gm" : "tls";
}

/// Which robust cost to use and its noise bound. `c_bar` is the largest
/// residual expected for an inlier, in residual units.
struct RobustCostSpec {
  CostKind kind = CostKind::TruncatedLS;
  double c_bar = 1.0;

  RobustCostSpec() = default;
  RobustCostSpec(CostKind k, double c) : kind(k), c_bar(c) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("RobustCostSpec: c_bar must be positive");
    }
  }
};

// ---------------------------------------------------------------------------
// Original costs.

inline double geman_mcclure(double r, double c_bar) {
  const double c2 = c_bar * c_bar;
  const double r2 = r * r;
  return c2 * r2 / (c2 + r2);
}

inline double truncated_ls(double r, double c_bar) {
  return std::min(r * r, c_bar * c_bar);
}

// ---------------------------------------------------------------------------
// Surrogates parameterized by the control parameter mu.

/// mu c^2 r^2 / (mu c^2 + r^2). Convex-ish for large mu, the GM cost at mu = 1.
inline double surrogate_gm(double r, double mu, double c_bar) {
  const double mc2 = mu * c_bar * c_bar;
  const double r2 = r * r;
  if (std::isinf(r2)) return mc2;
  return mc2 * r2 / (mc2 + r2);
}

/// Three-branch TLS surrogate: quadratic, a concave bridge, then flat at c^2.
/// Tends to the truncated cost as mu grows.
inline double surrogate_tls(double r, double mu, double c_bar) {
  const double c2 = c_bar * c_bar;
  const double r2 = r * r;
  if (r2 <= mu / (mu + 1.0) * c2) return r2;
  if (r2 >= (mu + 1.0) / mu * c2) return c2;
  return 2.0 * c_bar * std::abs(r) * std::sqrt(mu * (mu + 1.0)) -
         mu * (c2 + r2);
}

// ---------------------------------------------------------------------------
// Outlier-process penalties.

inline double penalty_gm(double w, double mu, double c_bar) {
  if (!(w > 0.0 && w <= 1.0)) {
    throw std::domain_error("penalty_gm: weight must lie in (0, 1]");
  }
  const double d = std::sqrt(w) - 1.0;
  return mu * c_bar * c_bar * d * d;
}

inline double penalty_tls(double w, double mu, double c_bar) {
  if (!(w >= 0.0 && w <= 1.0)) {
    throw std::domain_error("penalty_tls: weight must lie in [0, 1]");
  }
  return mu * (1.0 - w) / (mu + w) * c_bar * c_bar;
}

// ---------------------------------------------------------------------------
// Closed-form weight updates. Both take the squared residual.

inline double weight_update_gm(double r_sq, double mu, double c_bar) {
  const double mc2 = mu * c_bar * c_bar;
  const double ratio = mc2 / (r_sq + mc2);
  return ratio * ratio;
}

inline double weight_update_tls(double r_sq, double mu, double c_bar) {
  const double c2 = c_bar * c_bar;
  if (r_sq <= mu / (mu + 1.0) * c2) return 1.0;
  if (r_sq >= (mu + 1.0) / mu * c2) return 0.0;
  const double w = c_bar / std::sqrt(r_sq) * std::sqrt(mu * (mu + 1.0)) - mu;
  // Rounding at the breakpoints can push w a hair outside [0, 1].
  return std::clamp(w, 0.0, 1.0);
}

inline double surrogate(CostKind kind, double r, double mu, double c_bar) {
  return kind == CostKind::GemanMcClure ? surrogate_gm(r, mu, c_bar)
                                        : surrogate_tls(r, mu, c_bar);
}

inline double penalty(CostKind kind, double w, double mu, double c_bar) {
  return kind == CostKind::GemanMcClure ? penalty_gm(w, mu, c_bar)
                                        : penalty_tls(w, mu, c_bar);
}

inline double weight_update(CostKind kind, double r_sq, double mu,
                            double c_bar) {
  return kind == CostKind::GemanMcClure ? weight_update_gm(r_sq, mu, c_bar)
                                        : weight_update_tls(r_sq, mu, c_bar);
}

// ---------------------------------------------------------------------------
// Control-parameter schedule.

/// Initial mu from the largest squared residual of the unit-weight solve.
/// Returns nullopt when every residual is already inside the inlier band, in
/// which case no graduation is needed and all weights stay at 1.
inline std::optional<double> mu_init(CostKind kind, double r_max_sq,
                                     double c_bar) {
  const double c2 = c_bar * c_bar;
  if (kind == CostKind::GemanMcClure) {
    const double mu = 2.0 * r_max_sq / c2;
    if (!(mu > 1.0)) return std::nullopt;
    return mu;
  }
  const double denom = 2.0 * r_max_sq - c2;
  if (!(denom > 0.0)) return std::nullopt;
  const double mu = c2 / denom;
  if (!(mu > 0.0) || !std::isfinite(mu)) return std::nullopt;
  return mu;
}

/// GM anneals mu down towards 1, TLS anneals it up towards infinity.
inline double mu_step(CostKind kind, double mu, double factor) {
  return kind == CostKind::GemanMcClure ? mu / factor : mu * factor;
}

}  // namespace gnc
