#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ivins/ekf.hpp"
#include "ivins/msckf.hpp"
#include "ivins/state.hpp"
#include "ivins/vins_filters.hpp"

namespace ivins {

/// Camera looking sideways out of the body's +y axis (toward the circle
/// centre), slightly offset from the IMU.
CameraModel default_camera();

/// Paper IMU densities: Diag(0.008^2 I, 0.0004^2 I, 0.019^2 I, 0.05^2 I), 1.5 px.
NoiseConfig default_noise();

struct ScenarioConfig {
  // trajectory
  double radius = 5.0;               // m
  double angular_rate = 0.6;         // rad/s around the circle
  double vertical_amplitude = 0.5;   // m
  double vertical_frequency = 0.2;   // Hz
  double tilt_amplitude = 0.15;      // rad, roll and pitch
  double roll_frequency = 0.25;      // Hz
  double pitch_frequency = 0.15;     // Hz
  double duration = 60.0;            // s
  double imu_rate = 200.0;           // Hz
  double camera_rate = 20.0;         // Hz
  // landmarks
  double landmark_radius = 6.5;  // m
  double landmark_height = 4.0;  // m
  int landmark_count = 675;
  // sensors and filters
  NoiseConfig noise = default_noise();
  Gravity gravity;
  CameraModel camera = default_camera();
  WindowConfig window;
  double initial_variance = 1e-6;  // diagonal of P0 on every block
  /// When false the synthesized IMU and camera streams are exact; filters keep
  /// using `noise`.
  bool sensor_noise = true;
  std::uint64_t seed = 1;

  /// Throws ContractError when a field is out of range.
  void validate() const;
  int imu_per_frame() const;
  int frame_count() const;  // frames at t = 0, 1/camera_rate, ..., duration
};

struct TruthSample {
  double t = 0.0;
  ImuState state;  // biases left at zero; see ImuStream for the true biases
  Vec3 omega = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

/// Analytic circle with sinusoidal altitude and roll/pitch modulation. Angular
/// rate and specific force are the closed-form derivatives.
class Trajectory {
 public:
  explicit Trajectory(const ScenarioConfig& cfg);
  TruthSample sample(double t) const;

 private:
  ScenarioConfig cfg_;
};

std::vector<Vec3> generate_landmarks(const ScenarioConfig& cfg, std::mt19937_64& rng);

struct ImuStream {
  std::vector<ImuSample> samples;
  std::vector<Vec3> bg;  // true bias at each sample
  std::vector<Vec3> ba;
};

/// Adds bias random walks and white noise, discretised at the IMU rate.
ImuStream synthesize_imu(const Trajectory& truth, const ScenarioConfig& cfg, std::mt19937_64& rng);

struct Frame {
  double t = 0.0;
  std::vector<Measurement> measurements;
};

/// One frame per camera period; landmark ids are indices into `landmarks`.
std::vector<Frame> synthesize_camera(const Trajectory& truth, std::span<const Vec3> landmarks,
                                     const CameraModel& cam, const ScenarioConfig& cfg,
                                     std::mt19937_64& rng);

/// Ground-truth IMU state (true biases included) at IMU sample k.
ImuState true_state(const Trajectory& truth, const ImuStream& imu, std::size_t k);

/// IMU samples spanning frame k-1 to frame k, endpoints included.
std::span<const ImuSample> imu_between_frames(const ImuStream& imu, const ScenarioConfig& cfg,
                                              int frame);

}  // namespace ivins
