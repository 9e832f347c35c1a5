#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "gnc/errors.hpp"
#include "gnc/ply.hpp"
#include "gnc/random.hpp"
#include "gnc/registration.hpp"
#include "gnc/synthetic.hpp"

namespace gnc {
namespace {

TEST(Random, DeriveSeedSeparatesCells) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
}

TEST(Random, UniformRotationHasZeroMeanTrace) {
  // For Haar-distributed rotations E[trace R] = 0 and E[trace^2] = 1.
  Rng rng(1);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double t = rng.rotation().trace();
    sum += t;
    sum_sq += t * t;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sum_sq / n, 1.0, 0.05);
}

TEST(Random, SampleDistinctIsDistinct) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = rng.sample_distinct(10, 4);
    std::sort(s.begin(), s.end());
    EXPECT_EQ(std::unique(s.begin(), s.end()), s.end());
    EXPECT_LT(s.back(), 10u);
  }
}

TEST(GenerateRegistration, NoiselessRecoversTruth) {
  const auto inst = generate_registration({100, 0.0, 0.0, 1, std::nullopt});
  const RigidPose pose = weighted_horn(inst.correspondences, Eigen::VectorXd::Ones(100));
  EXPECT_LT((pose.R - inst.ground_truth.R).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((pose.t - inst.ground_truth.t).cwiseAbs().maxCoeff(), 1e-9);
  for (const auto& c : inst.correspondences) {
    EXPECT_GE(c.a.minCoeff(), 0.0);
    EXPECT_LE(c.a.maxCoeff(), 1.0);
  }
}

TEST(GenerateRegistration, OutlierCountAndDeterminism) {
  const auto a = generate_registration({100, 0.01, 0.7, 5, std::nullopt});
  EXPECT_EQ(a.outlier_count(), 70u);
  const auto b = generate_registration({100, 0.01, 0.7, 5, std::nullopt});
  ASSERT_EQ(a.correspondences.size(), b.correspondences.size());
  for (std::size_t i = 0; i < a.correspondences.size(); ++i) {
    EXPECT_EQ(a.correspondences[i].a, b.correspondences[i].a);
    EXPECT_EQ(a.correspondences[i].b, b.correspondences[i].b);
  }
  EXPECT_EQ(a.outlier_mask, b.outlier_mask);
  EXPECT_EQ(a.ground_truth.R, b.ground_truth.R);
  EXPECT_EQ(outlier_count_for(50, 0.33), 17u);
}

TEST(GenerateRegistration, InlierNoiseScale) {
  const auto inst = generate_registration({4000, 0.01, 0.0, 6, std::nullopt});
  const Eigen::VectorXd r = registration_residuals(inst.correspondences, inst.ground_truth);
  // |noise|^2 / sigma^2 is chi-square with 3 dof: mean 3.
  EXPECT_NEAR(r.squaredNorm() / 4000.0 / 1e-4, 3.0, 0.15);
}

TEST(GenerateRegistration, UsesCloudWhenGiven) {
  std::vector<Eigen::Vector3d> cloud;
  for (int i = 0; i < 200; ++i) cloud.emplace_back(i, 2.0 * i, 0.5 * i * i);
  const auto inst = generate_registration({50, 0.0, 0.0, 7, std::nullopt}, cloud);
  EXPECT_EQ(inst.correspondences.size(), 50u);
  for (const auto& c : inst.correspondences) {
    EXPECT_GE(c.a.minCoeff(), 0.0);
    EXPECT_LE(c.a.maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(GenerateShape, CountsDeterminismAndOutlierMechanism) {
  const auto inst = generate_shape_alignment({50, 0.0, 0.7, 3});
  EXPECT_EQ(inst.outlier_count(), 35u);
  EXPECT_GE(inst.ground_truth.s, 0.5);
  EXPECT_LE(inst.ground_truth.s, 2.0);
  const auto again = generate_shape_alignment({50, 0.0, 0.7, 3});
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(inst.correspondences[i].z, again.correspondences[i].z);
    const auto& c = inst.correspondences[i];
    const double r = (c.z - inst.ground_truth.project(c.B)).norm();
    if (inst.outlier_mask[i]) {
      // Rewired to the projection of some other model point.
      bool matches_other = false;
      for (std::size_t j = 0; j < 50; ++j) {
        if (j == i) continue;
        const auto proj = inst.ground_truth.project(inst.correspondences[j].B);
        matches_other = matches_other || (proj - c.z).norm() < 1e-12;
      }
      EXPECT_TRUE(matches_other);
    } else {
      EXPECT_LT(r, 1e-12);
    }
  }
}

TEST(RotationError, Examples) {
  Rng rng(4);
  const Eigen::Matrix3d R = rng.rotation();
  EXPECT_NEAR(rotation_error_deg(R, R), 0.0, 1e-6);
  const Eigen::Matrix3d half = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  EXPECT_NEAR(rotation_error_deg(Eigen::Matrix3d::Identity(), half), 180.0, 1e-9);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d axis = rng.normal3(1.0).normalized();
    const Eigen::Matrix3d ten =
        Eigen::AngleAxisd(10.0 * std::numbers::pi / 180.0, axis).toRotationMatrix();
    EXPECT_NEAR(rotation_error_deg(Eigen::Matrix3d::Identity(), ten), 10.0, 1e-9);
    EXPECT_NEAR(rotation_error_deg(R * ten, R), 10.0, 1e-9);
  }
}

TEST(PoseErrors, ScaleErrorIsRelative) {
  WeakPerspectivePose a, b;
  a.s = 1.1;
  b.s = 1.0;
  const ErrorMetrics e = pose_errors(a, b);
  ASSERT_TRUE(e.scale_error.has_value());
  EXPECT_NEAR(*e.scale_error, 0.1, 1e-12);
  EXPECT_FALSE(pose_errors(RigidPose{}, RigidPose{}).scale_error.has_value());
}

TEST(Ply, MinimalVertex) {
  std::istringstream in("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                        "property float y\nproperty float z\nend_header\n0.5 -1.25 3e2\n");
  const auto pts = parse_ply_points(in);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0], Eigen::Vector3d(0.5, -1.25, 300.0));
}

TEST(Ply, SkipsExtraPropertiesAndElements) {
  std::istringstream in(
      "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 2\n"
      "property float nx\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nelement face 1\nproperty list uchar int vertex_indices\n"
      "end_header\n9 1 2 3 255\n9 4 5 6 0\n3 0 1 1\n");
  const auto pts = parse_ply_points(in);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0], Eigen::Vector3d(1, 2, 3));
  EXPECT_EQ(pts[1], Eigen::Vector3d(4, 5, 6));
}

TEST(Ply, BinaryIsUnsupported) {
  std::istringstream in("ply\nformat binary_little_endian 1.0\nelement vertex 1\nend_header\n");
  EXPECT_THROW(parse_ply_points(in), UnsupportedFormat);
}

TEST(Ply, MalformedReportsLine) {
  std::istringstream bad_record("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n"
                                "property float y\nproperty float z\nend_header\n1 2 3\n1 two 3\n");
  try {
    parse_ply_points(bad_record, "cloud.ply");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.file(), "cloud.ply");
    EXPECT_EQ(e.line(), 9u);
  }
  std::istringstream bad_magic("plx\n");
  EXPECT_THROW(parse_ply_points(bad_magic), ParseError);
  std::istringstream truncated("ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
                               "property float y\nproperty float z\nend_header\n1 2 3\n");
  EXPECT_THROW(parse_ply_points(truncated), ParseError);
}

TEST(Ply, MissingFileIsIoError) {
  EXPECT_THROW(load_ply_points("/nonexistent/cloud.ply"), IoError);
}

}  // namespace
}  // namespace gnc
