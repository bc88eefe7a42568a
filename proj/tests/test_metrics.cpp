#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ivins/errors.hpp"
#include "ivins/metrics.hpp"

using namespace ivins;

namespace {

MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  MatrixXd A(n, n);
  for (int i = 0; i < A.size(); ++i) A.data()[i] = d(rng);
  return A * A.transpose() + 0.1 * MatrixXd::Identity(n, n);
}

ImuState random_imu(std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  ImuState x;
  x.R = exp_so3(Vec3(d(rng), d(rng), d(rng)));
  x.v = Vec3(d(rng), d(rng), d(rng));
  x.p = 3.0 * Vec3(d(rng), d(rng), d(rng));
  return x;
}

}  // namespace

TEST(Nees, ZeroErrorGivesZero) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(nees(VectorXd::Zero(6), random_spd(6, rng)), 0.0);
}

TEST(Nees, MatchesExplicitInverse) {
  std::mt19937_64 rng(2);
  const MatrixXd P = random_spd(6, rng);
  const VectorXd e = VectorXd::LinSpaced(6, -1.0, 2.0);
  EXPECT_NEAR(nees(e, P), e.dot(P.inverse() * e), 1e-10);
}

TEST(Nees, RejectsBadCovariance) {
  EXPECT_THROW(nees(VectorXd::Ones(3), MatrixXd::Identity(2, 2)), ContractError);
  EXPECT_THROW(nees(VectorXd::Ones(2), MatrixXd::Zero(2, 2)), ContractError);
  EXPECT_THROW(nees(VectorXd::Ones(2), -MatrixXd::Identity(2, 2)), ContractError);
}

TEST(Nees, ChiSquareCalibration) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 1.0);
  for (int dim : {3, 6}) {
    const MatrixXd P = random_spd(dim, rng);
    const MatrixXd L = P.llt().matrixL();
    double sum = 0.0;
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
      VectorXd z(dim);
      for (int i = 0; i < dim; ++i) z[i] = d(rng);
      sum += nees(L * z, P);
    }
    EXPECT_NEAR(sum / draws, dim, 0.1 * dim);
  }
}

TEST(ComputeMetrics, PerfectEstimate) {
  std::mt19937_64 rng(4);
  const ImuState x = random_imu(rng);
  for (Retraction r : {Retraction::kConventional, Retraction::kRightInvariant}) {
    const StepMetrics m = compute_metrics(x, x, MatrixXd::Identity(15, 15), r);
    EXPECT_LT(m.err_ori, 1e-12);
    EXPECT_EQ(m.err_pos, 0.0);
    EXPECT_LT(m.nees_ori, 1e-24);
    EXPECT_LT(m.nees_pose, 1e-24);
  }
}

TEST(ComputeMetrics, UsesNativeErrorCoordinates) {
  std::mt19937_64 rng(5);
  const ImuState est = random_imu(rng);
  Eigen::Matrix<double, 15, 1> e = Eigen::Matrix<double, 15, 1>::Zero();
  e.segment<3>(kTheta) = Vec3(0.01, -0.02, 0.03);
  e.segment<3>(kPos) = Vec3(0.1, 0.2, -0.1);
  const MatrixXd P = 0.01 * MatrixXd::Identity(15, 15);
  const ImuState ri_truth = imu_retract(est, e);
  const StepMetrics ri = compute_metrics(ri_truth, est, P, Retraction::kRightInvariant);
  EXPECT_NEAR(ri.nees_ori, e.segment<3>(kTheta).squaredNorm() / 0.01, 1e-9);
  EXPECT_NEAR(ri.nees_pose,
              (e.segment<3>(kTheta).squaredNorm() + e.segment<3>(kPos).squaredNorm()) / 0.01, 1e-8);
  const ImuState con_truth = conventional_imu_retract(est, e);
  const StepMetrics con = compute_metrics(con_truth, est, P, Retraction::kConventional);
  EXPECT_NEAR(con.nees_pose, ri.nees_pose, 1e-8);
  EXPECT_NEAR(con.err_pos, e.segment<3>(kPos).norm(), 1e-12);
  EXPECT_NEAR(con.err_ori, e.segment<3>(kTheta).norm(), 1e-12);
}

TEST(Aggregate, RmsAndMeanAcrossRuns) {
  RunMetrics a, b;
  a.push(0.0, {3.0, 1.0, 2.0, 4.0});
  a.push(1.0, {0.0, 0.0, 1.0, 1.0});
  b.push(0.0, {4.0, 1.0, 4.0, 8.0});
  b.push(1.0, {0.0, 2.0, 3.0, 5.0});
  const RunMetrics agg = aggregate({&a, &b});
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_DOUBLE_EQ(agg.rms_ori[0], std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(agg.rms_pos[1], std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(agg.nees_ori[0], 3.0);
  EXPECT_DOUBLE_EQ(agg.nees_pose[1], 3.0);
  EXPECT_DOUBLE_EQ(agg.t[1], 1.0);
  RunMetrics c;
  c.push(0.0, {});
  EXPECT_THROW(aggregate({&a, &c}), ContractError);
  EXPECT_EQ(aggregate({}).size(), 0u);
}

TEST(TimeAverage, SkipsLeadingFraction) {
  const std::vector<double> s{10.0, 1.0, 2.0, 3.0};
  EXPECT_DOUBLE_EQ(time_average(s), 4.0);
  EXPECT_DOUBLE_EQ(time_average(s, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(time_average({}), 0.0);
}

TEST(ComputeMetrics, SingularCovarianceGivesNan) {
  const ImuState x;
  const StepMetrics m = compute_metrics(x, x, MatrixXd::Zero(15, 15), Retraction::kRightInvariant);
  EXPECT_TRUE(std::isnan(m.nees_ori));
  EXPECT_TRUE(std::isnan(m.nees_pose));
  EXPECT_EQ(m.err_pos, 0.0);
}
