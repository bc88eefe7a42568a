#include <gtest/gtest.h>

#include <random>

#include "ivins/audit.hpp"
#include "ivins/invariance.hpp"
#include "ivins/vins_filters.hpp"

using namespace ivins;

namespace {

VinsState random_state(std::mt19937_64& rng, int landmarks) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto v = [&](double s) -> Vec3 { return Vec3(n(rng), n(rng), n(rng)) * s; };
  VinsState x;
  x.imu.R = exp_so3(v(1.0));
  x.imu.v = v(2.0);
  x.imu.p = v(3.0);
  x.imu.bg = v(0.01);
  x.imu.ba = v(0.1);
  for (int i = 0; i < landmarks; ++i) x.landmarks.push_back(v(5.0));
  return x;
}

// Landmark placed on the optical axis of an identity camera, 4 m ahead.
VinsState visible_state(std::mt19937_64& rng) {
  VinsState x = random_state(rng, 1);
  x.landmarks[0] = x.imu.p + x.imu.R * Vec3(0.3, -0.2, 4.0);
  return x;
}

UnobsTransform lab_transform() {
  UnobsTransform t;
  t.yaw = 0.5;
  t.translation = Vec3(1.0, -2.0, 0.5);
  t.sigma = Eigen::Vector4d(0.1 * 0.1, 0.1 * 0.1, 0.1 * 0.1, 0.1 * 0.1).asDiagonal();
  return t;
}

}  // namespace

TEST(Projection, OpticalAxis) {
  const CameraModel cam;
  const Eigen::Vector2d uv = project(cam, Vec3(0, 0, 1));
  EXPECT_DOUBLE_EQ(uv.x(), 376.0);
  EXPECT_DOUBLE_EQ(uv.y(), 240.0);
}

TEST(Projection, OffAxisPoint) {
  const CameraModel cam;
  const Eigen::Vector2d uv = project(cam, Vec3(1, 0, 1));
  EXPECT_DOUBLE_EQ(uv.x(), 836.0);
  EXPECT_DOUBLE_EQ(uv.y(), 240.0);
}

TEST(Projection, BehindCameraThrows) {
  const CameraModel cam;
  EXPECT_THROW(project(cam, Vec3(0, 0, -1)), BehindCameraError);
  EXPECT_THROW(project(cam, Vec3(0, 0, 0.005)), BehindCameraError);
}

TEST(Projection, JacobianMatchesFiniteDifferences) {
  const CameraModel cam;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const Vec3 xc(u(rng), u(rng), 2.0 + u(rng));
    Eigen::Matrix<double, 2, 3> fd;
    for (int j = 0; j < 3; ++j) {
      Vec3 d = Vec3::Zero();
      d[j] = 1e-6;
      fd.col(j) = (project_camera_point(cam, xc + d) - project_camera_point(cam, xc - d)) / 2e-6;
    }
    EXPECT_LT((fd - projection_jacobian(cam, xc)).norm(), 1e-6 * fd.norm());
  }
}

TEST(Visibility, ConeAndDepth) {
  const CameraModel cam;
  EXPECT_TRUE(is_visible(cam, Vec3(0, 0, 2)));
  EXPECT_FALSE(is_visible(cam, Vec3(0, 0, 0.005)));
  EXPECT_FALSE(is_visible(cam, Vec3(3, 0, 2)));
}

TEST(RightInvariantF, Layout) {
  std::mt19937_64 rng(2);
  const Gravity g;
  const VinsState x = random_state(rng, 2);
  const MatrixXd F = riekf_F(x, g);
  const Mat3& R = x.imu.R;
  EXPECT_EQ(F.rows(), 21);
  EXPECT_TRUE((F.block<3, 3>(kVel, kTheta).isApprox(skew(g.g))));
  EXPECT_TRUE((F.block<3, 3>(kPos, kVel).isIdentity(0.0)));
  EXPECT_TRUE((F.block<3, 3>(kTheta, kBg).isApprox(-R)));
  EXPECT_TRUE((F.block<3, 3>(kVel, kBg).isApprox(-skew(x.imu.v) * R)));
  EXPECT_TRUE((F.block<3, 3>(kVel, kBa).isApprox(-R)));
  EXPECT_TRUE((F.block<3, 3>(kPos, kBg).isApprox(-skew(x.imu.p) * R)));
  EXPECT_TRUE((F.block<3, 3>(kImuDim + 3, kBg).isApprox(-skew(x.landmarks[1]) * R)));
  // Bias rows vanish; landmark rows only couple to the gyro bias.
  EXPECT_TRUE(F.middleRows(kBg, 6).isZero(0.0));
  MatrixXd f_rows = F.bottomRows(6);
  f_rows.middleCols(kBg, 3).setZero();
  EXPECT_TRUE(f_rows.isZero(0.0));
  EXPECT_TRUE((F.block<3, 3>(kTheta, kTheta).isZero(0.0)));
}

TEST(RightInvariantF, IndependentOfInput) {
  std::mt19937_64 rng(3);
  const Gravity g;
  const VinsState x = random_state(rng, 1);
  const ImuSample a{0.0, Vec3(1, 2, 3), Vec3(4, 5, 6)};
  const ImuSample b{0.0, Vec3(-0.3, 0, 0.2), Vec3(0, 0, 9.81)};
  EXPECT_EQ(error_F(Retraction::kRightInvariant, x, a, g),
            error_F(Retraction::kRightInvariant, x, b, g));
  EXPECT_NE(error_F(Retraction::kConventional, x, a, g),
            error_F(Retraction::kConventional, x, b, g));
}

TEST(RightInvariantG, GyroColumn) {
  std::mt19937_64 rng(4);
  const VinsState x = random_state(rng, 1);
  const MatrixXd G = riekf_G(x);
  const Mat3& R = x.imu.R;
  EXPECT_TRUE((G.block<3, 3>(kTheta, 0).isApprox(-R)));
  EXPECT_TRUE((G.block<3, 3>(kVel, 0).isApprox(-skew(x.imu.v) * R)));
  EXPECT_TRUE((G.block<3, 3>(kPos, 0).isApprox(-skew(x.imu.p) * R)));
  EXPECT_TRUE((G.block<3, 3>(kImuDim, 0).isApprox(-skew(x.landmarks[0]) * R)));
  EXPECT_TRUE((G.block<3, 3>(kBg, 3).isIdentity(0.0)));
  EXPECT_TRUE((G.block<3, 3>(kBa, 9).isIdentity(0.0)));
  EXPECT_TRUE((G.block<3, 3>(kVel, 6).isApprox(-R)));
}

TEST(ConventionalF, PositionRowFollowsVelocity) {
  const VinsState x;
  const MatrixXd F = conekf_F(x, ImuSample{});
  EXPECT_TRUE((F.block<3, 3>(kPos, kVel).isIdentity(0.0)));
  EXPECT_TRUE((F.block<3, 3>(kPos, kTheta).isZero(0.0)));
}

TEST(RightInvariantH, Structure) {
  std::mt19937_64 rng(5);
  const CameraModel cam;
  for (int k = 0; k < 20; ++k) {
    const VinsState x = visible_state(rng);
    const MatrixXd H = riekf_H(x, cam, 0);
    for (int b : {kTheta, kVel, kBg, kBa}) EXPECT_TRUE(H.middleCols(b, 3).isZero(0.0));
    EXPECT_TRUE(H.middleCols(kPos, 3).isApprox(-H.middleCols(kImuDim, 3)));
    EXPECT_GT(H.norm(), 0.0);
  }
}

TEST(ConventionalH, OrientationColumnIsNonzero) {
  std::mt19937_64 rng(6);
  const CameraModel cam;
  const VinsState x = visible_state(rng);
  EXPECT_GT(conekf_H(x, cam, 0).middleCols(kTheta, 3).norm(), 1.0);
}

TEST(MeasurementH, BehindCameraThrows) {
  std::mt19937_64 rng(7);
  const CameraModel cam;
  VinsState x = random_state(rng, 1);
  x.landmarks[0] = x.imu.p - x.imu.R * Vec3(0, 0, 2);
  for (Retraction r : {Retraction::kConventional, Retraction::kRightInvariant}) {
    EXPECT_THROW(measurement_H(r, x, cam, 0), BehindCameraError);
  }
}

TEST(JacobianAudit, BothFiltersPass) {
  for (Retraction r : {Retraction::kConventional, Retraction::kRightInvariant}) {
    for (const AuditEntry& e : audit_jacobians(r, 10, 11)) {
      EXPECT_LT(e.max_error, kDefaultAuditTolerance) << e.name;
    }
  }
}

TEST(JacobianAudit, CatchesSignFlippedMeasurementJacobian) {
  AnalyticJacobians broken;
  broken.H = [](Retraction r, const VinsState& x, const CameraModel& cam, int i) -> MatrixXd {
    return -measurement_H(r, x, cam, i);
  };
  for (Retraction r : {Retraction::kConventional, Retraction::kRightInvariant}) {
    bool caught = false;
    for (const AuditEntry& e : audit_jacobians(r, 5, 12, broken)) {
      if (e.name == "H") caught = e.max_error > kDefaultAuditTolerance;
    }
    EXPECT_TRUE(caught);
  }
}

TEST(JacobianAudit, CatchesPerturbedTransitionJacobian) {
  AnalyticJacobians broken;
  broken.F = [](Retraction r, const VinsState& x, const ImuSample& u,
                const Gravity& g) -> MatrixXd {
    MatrixXd F = error_F(r, x, u, g);
    F.block<3, 3>(kPos, kVel) *= 1.001;
    return F;
  };
  bool caught = false;
  for (const AuditEntry& e : audit_jacobians(Retraction::kRightInvariant, 5, 13, broken)) {
    if (e.name == "F") caught = e.max_error > kDefaultAuditTolerance;
  }
  EXPECT_TRUE(caught);
}

TEST(StepIdentities, RightInvariantHoldsEveryStep) {
  const LabScenario s = make_lab_scenario(20, 3);
  const IdentityReport rep = check_step_identities(Retraction::kRightInvariant, s, lab_transform());
  EXPECT_LT(rep.max_phi_residual, 1e-6);
  EXPECT_LT(rep.max_hn_residual, 1e-8);
}

TEST(StepIdentities, ConventionalTwoStepChainIsViolated) {
  const LabScenario s = make_lab_scenario(20, 3);
  const ChainReport rep = check_chain_condition(Retraction::kConventional, s, lab_transform(), 0, 2);
  EXPECT_GT(rep.max_residual, 1e-3);
}

TEST(VinsFilter, CovarianceStaysSymmetric) {
  const LabScenario s = make_lab_scenario(20, 4);
  for (Retraction r : {Retraction::kConventional, Retraction::kRightInvariant}) {
    const FilterTrace trace = run_filter(r, s, s.initial);
    ASSERT_EQ(trace.records.size(), 20u);
    for (const auto& b : trace.posteriors) {
      EXPECT_LT((b.cov - b.cov.transpose()).norm(), 1e-12 * b.cov.norm());
      const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(b.cov);
      EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-9 * b.cov.trace());
    }
    int updated = 0;
    for (const auto& rec : trace.records) updated += rec.updated ? 1 : 0;
    EXPECT_EQ(updated, 20);
  }
}
