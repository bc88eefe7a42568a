#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ivins/ekf.hpp"
#include "ivins/errors.hpp"
#include "ivins/sim.hpp"

using namespace ivins;

namespace {

ScenarioConfig noise_free(double duration) {
  ScenarioConfig cfg;
  cfg.duration = duration;
  cfg.noise.Q.setZero();
  return cfg;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Trajectory, CircleSpeedWithoutVerticalMotion) {
  ScenarioConfig cfg;
  cfg.vertical_amplitude = 0.0;
  const Trajectory truth(cfg);
  for (double t : {0.0, 1.3, 7.7, 42.0}) {
    EXPECT_NEAR(truth.sample(t).state.v.norm(), cfg.radius * cfg.angular_rate, 1e-12);
  }
}

TEST(Trajectory, AverageSpeedIsThreeMetersPerSecond) {
  const ScenarioConfig cfg;
  const Trajectory truth(cfg);
  double sum = 0.0;
  const int n = 6000;
  for (int i = 0; i < n; ++i) sum += truth.sample(cfg.duration * i / n).state.v.norm();
  EXPECT_NEAR(sum / n, 3.0, 0.05);
}

TEST(Trajectory, RotationStaysOrthonormal) {
  const ScenarioConfig cfg;
  const Trajectory truth(cfg);
  for (double t = 0.0; t < 60.0; t += 3.7) {
    const Mat3 R = truth.sample(t).state.R;
    EXPECT_LT((R.transpose() * R - Mat3::Identity()).norm(), 1e-10);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-10);
  }
}

TEST(Trajectory, EmittedRatesMatchNumericalDerivatives) {
  const ScenarioConfig cfg;
  const Trajectory truth(cfg);
  const double h = 1e-5;
  for (double t : {0.5, 11.0, 33.3}) {
    const TruthSample s = truth.sample(t);
    const Mat3 dR = (truth.sample(t + h).state.R - truth.sample(t - h).state.R) / (2 * h);
    EXPECT_LT((vee(s.state.R.transpose() * dR) - s.omega).norm(), 1e-7);
    const Vec3 acc = (truth.sample(t + h).state.v - truth.sample(t - h).state.v) / (2 * h);
    EXPECT_LT((s.state.R.transpose() * (acc - cfg.gravity.g) - s.accel).norm(), 1e-6);
  }
}

TEST(Trajectory, NoiseFreeIntegrationTracksTruth) {
  for (double duration : {1.0, 10.0}) {
    const ScenarioConfig cfg = noise_free(duration);
    const Trajectory truth(cfg);
    std::mt19937_64 rng(1);
    const ImuStream imu = synthesize_imu(truth, cfg, rng);
    const ImuState end = propagate_mean(truth.sample(0.0).state, imu.samples, cfg.gravity);
    const ImuState ref = truth.sample(duration).state;
    const double tol = duration == 1.0 ? 1e-6 : 1e-5;
    EXPECT_LT((end.p - ref.p).norm(), tol);
    EXPECT_LT(log_so3(ref.R.transpose() * end.R).norm(), tol);
  }
}

TEST(Landmarks, CylinderLayout) {
  const ScenarioConfig cfg;
  std::mt19937_64 rng(2);
  const auto lm = generate_landmarks(cfg, rng);
  ASSERT_EQ(lm.size(), 675u);
  double lo = 1e9, hi = -1e9;
  for (const Vec3& f : lm) {
    EXPECT_NEAR(f.head<2>().norm(), 6.5, 1e-12);
    lo = std::min(lo, f.z());
    hi = std::max(hi, f.z());
  }
  EXPECT_LE(hi - lo, 4.0);
  EXPECT_GT(hi - lo, 3.5);
}

TEST(Landmarks, DeterministicGivenSeed) {
  const ScenarioConfig cfg;
  std::mt19937_64 a(3), b(3);
  EXPECT_EQ(generate_landmarks(cfg, a), generate_landmarks(cfg, b));
}

TEST(ImuSynthesis, ZeroNoiseEqualsTruth) {
  const ScenarioConfig cfg = noise_free(2.0);
  const Trajectory truth(cfg);
  std::mt19937_64 rng(4);
  const ImuStream imu = synthesize_imu(truth, cfg, rng);
  ASSERT_EQ(imu.samples.size(), 401u);
  for (std::size_t k = 0; k < imu.samples.size(); k += 37) {
    const TruthSample s = truth.sample(imu.samples[k].t);
    EXPECT_EQ(imu.samples[k].omega, s.omega);
    EXPECT_EQ(imu.samples[k].accel, s.accel);
  }
}

TEST(ImuSynthesis, WhiteNoiseStatistics) {
  ScenarioConfig cfg;
  cfg.duration = 500.0;
  const Trajectory truth(cfg);
  std::mt19937_64 rng(5);
  const ImuStream imu = synthesize_imu(truth, cfg, rng);
  std::vector<double> ng, dbg;
  double sum_sq = 0.0;
  for (std::size_t k = 0; k + 1 < imu.samples.size(); ++k) {
    const Vec3 n = imu.samples[k].omega - truth.sample(imu.samples[k].t).omega - imu.bg[k];
    sum_sq += n.x() * n.x();
    ng.push_back(n.x());
    dbg.push_back(imu.bg[k + 1].x() - imu.bg[k].x());
  }
  const double var = sum_sq / static_cast<double>(ng.size());
  const double expected = 0.008 * 0.008 * cfg.imu_rate;
  EXPECT_NEAR(var, expected, 0.05 * expected);
  EXPECT_LT(std::abs(correlation(ng, dbg)), 0.02);
}

TEST(CameraSynthesis, EnoughLandmarksInView) {
  const ScenarioConfig cfg;
  std::mt19937_64 lrng(6), crng(7);
  const Trajectory truth(cfg);
  const auto lm = generate_landmarks(cfg, lrng);
  const auto frames = synthesize_camera(truth, lm, cfg.camera, cfg, crng);
  ASSERT_EQ(static_cast<int>(frames.size()), cfg.frame_count());
  for (const Frame& f : frames) EXPECT_GE(f.measurements.size(), 10u) << "t=" << f.t;
}

TEST(CameraSynthesis, PixelNoiseStatistics) {
  ScenarioConfig cfg;
  cfg.duration = 20.0;
  std::mt19937_64 lrng(8), crng(9);
  const Trajectory truth(cfg);
  const auto lm = generate_landmarks(cfg, lrng);
  const auto frames = synthesize_camera(truth, lm, cfg.camera, cfg, crng);
  double sum_sq = 0.0;
  int count = 0;
  for (const Frame& f : frames) {
    const TruthSample s = truth.sample(f.t);
    for (const Measurement& m : f.measurements) {
      const Vec3 fI = s.state.R.transpose() * (lm[m.landmark_id] - s.state.p);
      const Eigen::Vector2d d = m.uv - project(cfg.camera, fI);
      sum_sq += d.squaredNorm();
      count += 2;
    }
  }
  EXPECT_GT(count, 10000);
  EXPECT_NEAR(std::sqrt(sum_sq / count), 1.5, 0.05 * 1.5);
}

TEST(CameraSynthesis, ExactWhenSensorNoiseIsOff) {
  ScenarioConfig cfg;
  cfg.duration = 1.0;
  cfg.sensor_noise = false;
  std::mt19937_64 lrng(13), crng(14);
  const Trajectory truth(cfg);
  const auto lm = generate_landmarks(cfg, lrng);
  for (const Frame& f : synthesize_camera(truth, lm, cfg.camera, cfg, crng)) {
    const TruthSample s = truth.sample(f.t);
    for (const Measurement& m : f.measurements) {
      const Vec3 fI = s.state.R.transpose() * (lm[m.landmark_id] - s.state.p);
      EXPECT_EQ(m.uv, project(cfg.camera, fI));
    }
  }
}

TEST(CameraSynthesis, DeterministicGivenSeed) {
  ScenarioConfig cfg;
  cfg.duration = 2.0;
  const Trajectory truth(cfg);
  std::mt19937_64 l(10);
  const auto lm = generate_landmarks(cfg, l);
  std::mt19937_64 a(11), b(11);
  const auto fa = synthesize_camera(truth, lm, cfg.camera, cfg, a);
  const auto fb = synthesize_camera(truth, lm, cfg.camera, cfg, b);
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t k = 0; k < fa.size(); ++k) {
    ASSERT_EQ(fa[k].measurements.size(), fb[k].measurements.size());
    for (std::size_t i = 0; i < fa[k].measurements.size(); ++i) {
      EXPECT_EQ(fa[k].measurements[i].uv, fb[k].measurements[i].uv);
      EXPECT_EQ(fa[k].measurements[i].landmark_id, fb[k].measurements[i].landmark_id);
    }
  }
}

TEST(Scenario, FrameSlicing) {
  ScenarioConfig cfg;
  cfg.duration = 1.0;
  const Trajectory truth(cfg);
  std::mt19937_64 rng(12);
  const ImuStream imu = synthesize_imu(truth, cfg, rng);
  EXPECT_EQ(cfg.imu_per_frame(), 10);
  EXPECT_EQ(cfg.frame_count(), 21);
  EXPECT_TRUE(imu_between_frames(imu, cfg, 0).empty());
  const auto s = imu_between_frames(imu, cfg, 3);
  ASSERT_EQ(s.size(), 11u);
  EXPECT_DOUBLE_EQ(s.front().t, 0.1);
  EXPECT_DOUBLE_EQ(s.back().t, 0.15);
  EXPECT_THROW(imu_between_frames(imu, cfg, 21), ContractError);
}

TEST(Scenario, ValidationRejectsBadValues) {
  ScenarioConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.camera_rate = 30.0;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = ScenarioConfig{};
  cfg.window.max_clones = 1;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = ScenarioConfig{};
  cfg.imu_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ContractError);
}
