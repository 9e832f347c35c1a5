#pragma once

// Seeded sampling with fixed algorithms. The std distributions are
// implementation-defined, so uniform/normal draws are derived from raw
// mt19937_64 output here to keep generated data identical across platforms.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace gnc {

/// splitmix64 finalizer; used to derive independent seeds from tuples.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(mix_seed(seed) ^ a) ^ (b * 0xD1B54A32D192ED03ull));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (both outputs used).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Uniform integer in [0, n), n > 0, via rejection (no modulo bias).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  /// k distinct indices from [0, n), in draw order. Requires k <= n.
  std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    out.reserve(k);
    while (out.size() < k) {
      const auto candidate = static_cast<std::size_t>(index(n));
      bool seen = false;
      for (std::size_t j : out) seen = seen || j == candidate;
      if (!seen) out.push_back(candidate);
    }
    return out;
  }

  /// Unit quaternion (x, y, z, w) uniform on S^3: normalized Gaussian 4-vector.
  Eigen::Vector4d unit_quaternion() {
    Eigen::Vector4d q;
    double norm = 0.0;
    do {
      for (int i = 0; i < 4; ++i) q[i] = normal();
      norm = q.norm();
    } while (norm < 1e-12);
    return q / norm;
  }

  /// Haar-uniform rotation.
  Eigen::Matrix3d rotation() {
    const Eigen::Vector4d q = unit_quaternion();
    return Eigen::Quaterniond(q[3], q[0], q[1], q[2]).toRotationMatrix();
  }

  Eigen::Vector3d uniform3(double lo, double hi) {
    const double x = uniform(lo, hi);
    const double y = uniform(lo, hi);
    const double z = uniform(lo, hi);
    return {x, y, z};
  }

  Eigen::Vector3d normal3(double sigma) {
    const double x = normal();
    const double y = normal();
    const double z = normal();
    return sigma * Eigen::Vector3d(x, y, z);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gnc
