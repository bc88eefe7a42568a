#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ivins/ekf.hpp"
#include "ivins/state.hpp"

namespace ivins {

/// Minimum camera-frame depth for a valid projection, meters.
inline constexpr double kMinDepth = 0.01;

class BehindCameraError : public std::runtime_error {
 public:
  BehindCameraError() : std::runtime_error("point is behind the camera") {}
};

struct CameraModel {
  Pose T_CI;  // maps IMU-frame points into the camera frame
  double fx = 460.0;
  double fy = 460.0;
  double cx = 376.0;
  double cy = 240.0;
  int width = 752;
  int height = 480;
  bool check_fov = true;  // 90 degree cone + image bounds

  /// Camera pose in the IMU frame, (Delta R, Delta p).
  Pose T_IC() const { return pose_inverse(T_CI); }
};

/// Pinhole projection of a camera-frame point.
Eigen::Vector2d project_camera_point(const CameraModel& cam, const Vec3& xc);
/// d(pixel)/d(camera-frame point), 2x3.
Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel& cam, const Vec3& xc);

/// Full measurement function: IMU-frame point -> extrinsics -> pinhole.
Eigen::Vector2d project(const CameraModel& cam, const Vec3& x_imu);

/// Depth, field-of-view cone and image-bound check for a camera-frame point.
bool is_visible(const CameraModel& cam, const Vec3& xc);

/// Predicted pixel of landmark `index` seen from the state's IMU pose.
Eigen::Vector2d predict_measurement(const VinsState& x, const CameraModel& cam, int index);

// ---- right-invariant Jacobians ------------------------------------------------

MatrixXd riekf_F(const VinsState& xhat, const Gravity& g);
MatrixXd riekf_G(const VinsState& xhat);
MatrixXd riekf_H(const VinsState& xhat, const CameraModel& cam, int index);

// ---- conventional Jacobians (depend on the IMU reading) ---------------------------

MatrixXd conekf_F(const VinsState& xhat, const ImuSample& u);
MatrixXd conekf_G(const VinsState& xhat);
MatrixXd conekf_H(const VinsState& xhat, const CameraModel& cam, int index);

MatrixXd error_F(Retraction r, const VinsState& xhat, const ImuSample& u, const Gravity& g);
MatrixXd error_G(Retraction r, const VinsState& xhat);
MatrixXd measurement_H(Retraction r, const VinsState& xhat, const CameraModel& cam, int index);

/// IMU-only (15-dim) versions used by the sliding-window filters.
MatrixXd imu_error_F(Retraction r, const ImuState& x, const ImuSample& u, const Gravity& g);
MatrixXd imu_error_G(Retraction r, const ImuState& x);

/// Everything a propagation step produces.
struct PropagationResult {
  MeanTrajectory trajectory;
  MatrixXd phi;
  MatrixXd qd;
};

/// Mean, transition matrix and discrete noise of the IMU block (15 x 15).
PropagationResult propagate_imu_block(Retraction r, const ImuState& x0,
                                      std::span<const ImuSample> imu, const Gravity& g,
                                      const ImuNoise& Q);

/// What one filter cycle did; used by the invariance experiments.
struct StepRecord {
  MatrixXd phi;
  MatrixXd qd;
  MatrixXd H;  // stacked over the landmarks used; may have zero rows
  MatrixXd K;
  GaussianBelief<VinsState> predicted;
  std::vector<int> used_landmarks;
  bool updated = false;
};

/// Landmark-in-state EKF (ConEKF-VINS or RIEKF-VINS depending on the retraction).
/// Measurement landmark ids index the state's landmark list.
class VinsFilter {
 public:
  VinsFilter(Retraction retraction, CameraModel cam, Gravity gravity, NoiseConfig noise,
             GaussianBelief<VinsState> initial);

  /// Propagates across the IMU interval (endpoints included), then updates with
  /// every measurement whose landmark projects in front of the predicted camera.
  StepRecord step(std::span<const ImuSample> imu, std::span<const Measurement> frame);

  StepRecord propagate(std::span<const ImuSample> imu);
  void update(std::span<const Measurement> frame, StepRecord& record);

  const GaussianBelief<VinsState>& belief() const { return belief_; }
  Retraction retraction() const { return retraction_; }
  const CameraModel& camera() const { return cam_; }

 private:
  Retraction retraction_;
  CameraModel cam_;
  Gravity gravity_;
  NoiseConfig noise_;
  GaussianBelief<VinsState> belief_;
};

}  // namespace ivins
