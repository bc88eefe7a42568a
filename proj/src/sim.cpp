#include "ivins/sim.hpp"

#include <cmath>
#include <numbers>

#include "ivins/errors.hpp"

namespace ivins {

using std::numbers::pi;

CameraModel default_camera() {
  CameraModel cam;
  Pose T_IC;
  // camera x = body x, camera y = -body z, camera z (optical axis) = body y
  T_IC.rotation << 1.0, 0.0, 0.0,
                   0.0, 0.0, 1.0,
                   0.0, -1.0, 0.0;
  T_IC.translation = Vec3(0.05, 0.0, 0.02);
  cam.T_CI = pose_inverse(T_IC);
  return cam;
}

NoiseConfig default_noise() { return NoiseConfig::from_sigmas(0.008, 0.0004, 0.019, 0.05, 1.5); }

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ContractError(msg);
  };
  require(radius > 0.0, "radius must be positive");
  require(duration > 0.0, "duration must be positive");
  require(imu_rate > 0.0 && camera_rate > 0.0, "rates must be positive");
  const double ratio = imu_rate / camera_rate;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1.0,
          "camera rate must divide the IMU rate");
  require(landmark_count >= 0, "landmark count must be non-negative");
  require(landmark_radius > 0.0 && landmark_height >= 0.0, "invalid landmark cylinder");
  require(noise.pixel_sigma > 0.0, "pixel sigma must be positive");
  require(camera.fx > 0.0 && camera.fy > 0.0, "focal lengths must be positive");
  require(window.max_clones >= 2, "max_clones must be >= 2");
  require(window.min_track_len >= 2, "min_track_len must be >= 2");
  require(initial_variance > 0.0, "initial variance must be positive");
  require(gravity.g.norm() > 0.0, "gravity must be nonzero");
  Eigen::SelfAdjointEigenSolver<ImuNoise> eig(noise.Q);
  require(eig.eigenvalues().minCoeff() >= -1e-15, "IMU noise matrix must be PSD");
}

int ScenarioConfig::imu_per_frame() const {
  return static_cast<int>(std::lround(imu_rate / camera_rate));
}

int ScenarioConfig::frame_count() const {
  return static_cast<int>(std::floor(duration * camera_rate + 1e-9)) + 1;
}

Trajectory::Trajectory(const ScenarioConfig& cfg) : cfg_(cfg) {}

TruthSample Trajectory::sample(double t) const {
  const double r = cfg_.radius;
  const double w = cfg_.angular_rate;
  const double A = cfg_.vertical_amplitude;
  const double wz = 2.0 * pi * cfg_.vertical_frequency;
  const double wr = 2.0 * pi * cfg_.roll_frequency;
  const double wp = 2.0 * pi * cfg_.pitch_frequency;
  const double a = cfg_.tilt_amplitude;
  const double psi = w * t;

  TruthSample s;
  s.t = t;
  s.state.p = Vec3(r * std::cos(psi), r * std::sin(psi), A * std::sin(wz * t));
  s.state.v = Vec3(-r * w * std::sin(psi), r * w * std::cos(psi), A * wz * std::cos(wz * t));
  const Vec3 acc(-r * w * w * std::cos(psi), -r * w * w * std::sin(psi),
                 -A * wz * wz * std::sin(wz * t));

  const double heading = psi + 0.5 * pi;
  const double roll = a * std::sin(wr * t);
  const double roll_rate = a * wr * std::cos(wr * t);
  const double pitch = a * std::sin(wp * t + pi / 3.0);
  const double pitch_rate = a * wp * std::cos(wp * t + pi / 3.0);
  const Mat3 Rx = rot_x(roll);
  const Mat3 Ry = rot_y(pitch);
  s.state.R = rot_z(heading) * Ry * Rx;
  s.omega = Rx.transpose() * Ry.transpose() * Vec3(0.0, 0.0, w) +
            Rx.transpose() * Vec3(0.0, pitch_rate, 0.0) + Vec3(roll_rate, 0.0, 0.0);
  s.accel = s.state.R.transpose() * (acc - cfg_.gravity.g);
  return s;
}

std::vector<Vec3> generate_landmarks(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * pi);
  std::uniform_real_distribution<double> height(-0.5 * cfg.landmark_height,
                                                0.5 * cfg.landmark_height);
  std::vector<Vec3> out;
  out.reserve(cfg.landmark_count);
  for (int i = 0; i < cfg.landmark_count; ++i) {
    const double th = angle(rng);
    const double z = height(rng);
    out.emplace_back(cfg.landmark_radius * std::cos(th), cfg.landmark_radius * std::sin(th), z);
  }
  return out;
}

ImuStream synthesize_imu(const Trajectory& truth, const ScenarioConfig& cfg,
                         std::mt19937_64& rng) {
  const int n = static_cast<int>(std::floor(cfg.duration * cfg.imu_rate + 1e-9)) + 1;
  const double dt = 1.0 / cfg.imu_rate;
  Eigen::Matrix<double, 12, 1> q = cfg.noise.Q.diagonal().cwiseMax(0.0).cwiseSqrt();
  if (!cfg.sensor_noise) q.setZero();
  const double white = std::sqrt(cfg.imu_rate);
  const double walk = std::sqrt(dt);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](const auto& sigma, double scale) {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = sigma[i] * scale * normal(rng);
    return v;
  };

  ImuStream out;
  out.samples.reserve(n);
  out.bg.reserve(n);
  out.ba.reserve(n);
  Vec3 bg = Vec3::Zero();
  Vec3 ba = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const TruthSample s = truth.sample(t);
    const Vec3 ng = draw(q.segment<3>(0), white);
    const Vec3 na = draw(q.segment<3>(6), white);
    out.samples.push_back({t, s.omega + bg + ng, s.accel + ba + na});
    out.bg.push_back(bg);
    out.ba.push_back(ba);
    bg += draw(q.segment<3>(3), walk);
    ba += draw(q.segment<3>(9), walk);
  }
  return out;
}

std::vector<Frame> synthesize_camera(const Trajectory& truth, std::span<const Vec3> landmarks,
                                     const CameraModel& cam, const ScenarioConfig& cfg,
                                     std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, cfg.noise.pixel_sigma);
  const int frames = cfg.frame_count();
  std::vector<Frame> out;
  out.reserve(frames);
  for (int k = 0; k < frames; ++k) {
    const double t = k * (1.0 / cfg.camera_rate);
    const TruthSample s = truth.sample(t);
    Frame frame{t, {}};
    for (std::size_t i = 0; i < landmarks.size(); ++i) {
      const Vec3 fI = s.state.R.transpose() * (landmarks[i] - s.state.p);
      const Vec3 xc = pose_transform_point(cam.T_CI, fI);
      if (!is_visible(cam, xc)) continue;
      Eigen::Vector2d uv = project_camera_point(cam, xc);
      if (cfg.sensor_noise) {
        uv.x() += normal(rng);
        uv.y() += normal(rng);
      }
      frame.measurements.push_back({t, static_cast<int>(i), uv});
    }
    out.push_back(std::move(frame));
  }
  return out;
}

ImuState true_state(const Trajectory& truth, const ImuStream& imu, std::size_t k) {
  ImuState s = truth.sample(imu.samples[k].t).state;
  s.bg = imu.bg[k];
  s.ba = imu.ba[k];
  return s;
}

std::span<const ImuSample> imu_between_frames(const ImuStream& imu, const ScenarioConfig& cfg,
                                              int frame) {
  if (frame <= 0) return {};
  const std::size_t per = static_cast<std::size_t>(cfg.imu_per_frame());
  const std::size_t begin = (frame - 1) * per;
  if (begin + per >= imu.samples.size()) {
    throw ContractError("imu_between_frames: frame beyond the IMU stream");
  }
  return std::span<const ImuSample>(imu.samples).subspan(begin, per + 1);
}

}  // namespace ivins
