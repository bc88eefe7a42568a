#include "ivins/vins_filters.hpp"

#include <cmath>
#include <numbers>

#include "ivins/errors.hpp"

namespace ivins {

Eigen::Vector2d project_camera_point(const CameraModel& cam, const Vec3& xc) {
  if (xc.z() <= kMinDepth) throw BehindCameraError();
  return {cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy};
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const CameraModel& cam, const Vec3& xc) {
  const double iz = 1.0 / xc.z();
  Eigen::Matrix<double, 2, 3> J;
  J << cam.fx * iz, 0.0, -cam.fx * xc.x() * iz * iz,
       0.0, cam.fy * iz, -cam.fy * xc.y() * iz * iz;
  return J;
}

Eigen::Vector2d project(const CameraModel& cam, const Vec3& x_imu) {
  return project_camera_point(cam, pose_transform_point(cam.T_CI, x_imu));
}

bool is_visible(const CameraModel& cam, const Vec3& xc) {
  if (xc.z() <= kMinDepth) return false;
  if (!cam.check_fov) return true;
  // 90 degree cone: angle to the optical axis at most 45 degrees.
  if (xc.head<2>().norm() > xc.z()) return false;
  const Eigen::Vector2d uv = project_camera_point(cam, xc);
  return uv.x() >= 0.0 && uv.x() < cam.width && uv.y() >= 0.0 && uv.y() < cam.height;
}

namespace {

Vec3 landmark_in_imu(const VinsState& x, int index) {
  if (index < 0 || index >= static_cast<int>(x.landmarks.size())) {
    throw ContractError("landmark index out of range");
  }
  return x.imu.R.transpose() * (x.landmarks[index] - x.imu.p);
}

int landmark_col(int index) { return kImuDim + 3 * index; }

}  // namespace

Eigen::Vector2d predict_measurement(const VinsState& x, const CameraModel& cam, int index) {
  return project(cam, landmark_in_imu(x, index));
}

MatrixXd riekf_F(const VinsState& xhat, const Gravity& g) {
  const int n = xhat.error_dim();
  const ImuState& s = xhat.imu;
  MatrixXd F = MatrixXd::Zero(n, n);
  F.block<3, 3>(kTheta, kBg) = -s.R;
  F.block<3, 3>(kVel, kTheta) = skew(g.g);
  F.block<3, 3>(kVel, kBg) = -skew(s.v) * s.R;
  F.block<3, 3>(kVel, kBa) = -s.R;
  F.block<3, 3>(kPos, kVel) = Mat3::Identity();
  F.block<3, 3>(kPos, kBg) = -skew(s.p) * s.R;
  for (int i = 0; i < static_cast<int>(xhat.landmarks.size()); ++i) {
    F.block<3, 3>(landmark_col(i), kBg) = -skew(xhat.landmarks[i]) * s.R;
  }
  return F;
}

MatrixXd riekf_G(const VinsState& xhat) {
  const int n = xhat.error_dim();
  const ImuState& s = xhat.imu;
  MatrixXd G = MatrixXd::Zero(n, 12);
  G.block<3, 3>(kTheta, 0) = -s.R;
  G.block<3, 3>(kVel, 0) = -skew(s.v) * s.R;
  G.block<3, 3>(kVel, 6) = -s.R;
  G.block<3, 3>(kPos, 0) = -skew(s.p) * s.R;
  G.block<3, 3>(kBg, 3) = Mat3::Identity();
  G.block<3, 3>(kBa, 9) = Mat3::Identity();
  for (int i = 0; i < static_cast<int>(xhat.landmarks.size()); ++i) {
    G.block<3, 3>(landmark_col(i), 0) = -skew(xhat.landmarks[i]) * s.R;
  }
  return G;
}

MatrixXd riekf_H(const VinsState& xhat, const CameraModel& cam, int index) {
  const Vec3 fI = landmark_in_imu(xhat, index);
  const Vec3 xc = pose_transform_point(cam.T_CI, fI);
  if (xc.z() <= kMinDepth) throw BehindCameraError();
  const Eigen::Matrix<double, 2, 3> dh = projection_jacobian(cam, xc) * cam.T_CI.rotation;
  const Mat3 Rt = xhat.imu.R.transpose();
  MatrixXd H = MatrixXd::Zero(2, xhat.error_dim());
  H.block<2, 3>(0, kPos) = -dh * Rt;
  H.block<2, 3>(0, landmark_col(index)) = dh * Rt;
  return H;
}

MatrixXd conekf_F(const VinsState& xhat, const ImuSample& u) {
  const int n = xhat.error_dim();
  const ImuState& s = xhat.imu;
  MatrixXd F = MatrixXd::Zero(n, n);
  F.block<3, 3>(kTheta, kTheta) = -skew(u.omega - s.bg);
  F.block<3, 3>(kTheta, kBg) = -Mat3::Identity();
  F.block<3, 3>(kVel, kTheta) = -s.R * skew(u.accel - s.ba);
  F.block<3, 3>(kVel, kBa) = -s.R;
  F.block<3, 3>(kPos, kVel) = Mat3::Identity();
  return F;
}

MatrixXd conekf_G(const VinsState& xhat) {
  MatrixXd G = MatrixXd::Zero(xhat.error_dim(), 12);
  G.block<3, 3>(kTheta, 0) = -Mat3::Identity();
  G.block<3, 3>(kVel, 6) = -xhat.imu.R;
  G.block<3, 3>(kBg, 3) = Mat3::Identity();
  G.block<3, 3>(kBa, 9) = Mat3::Identity();
  return G;
}

MatrixXd conekf_H(const VinsState& xhat, const CameraModel& cam, int index) {
  const Vec3 fI = landmark_in_imu(xhat, index);
  const Vec3 xc = pose_transform_point(cam.T_CI, fI);
  if (xc.z() <= kMinDepth) throw BehindCameraError();
  const Eigen::Matrix<double, 2, 3> dh = projection_jacobian(cam, xc) * cam.T_CI.rotation;
  const Mat3 Rt = xhat.imu.R.transpose();
  MatrixXd H = MatrixXd::Zero(2, xhat.error_dim());
  H.block<2, 3>(0, kTheta) = dh * skew(fI);
  H.block<2, 3>(0, kPos) = -dh * Rt;
  H.block<2, 3>(0, landmark_col(index)) = dh * Rt;
  return H;
}

MatrixXd error_F(Retraction r, const VinsState& xhat, const ImuSample& u, const Gravity& g) {
  return r == Retraction::kRightInvariant ? riekf_F(xhat, g) : conekf_F(xhat, u);
}

MatrixXd error_G(Retraction r, const VinsState& xhat) {
  return r == Retraction::kRightInvariant ? riekf_G(xhat) : conekf_G(xhat);
}

MatrixXd measurement_H(Retraction r, const VinsState& xhat, const CameraModel& cam, int index) {
  return r == Retraction::kRightInvariant ? riekf_H(xhat, cam, index)
                                          : conekf_H(xhat, cam, index);
}

MatrixXd imu_error_F(Retraction r, const ImuState& x, const ImuSample& u, const Gravity& g) {
  return error_F(r, VinsState{x, {}}, u, g);
}

MatrixXd imu_error_G(Retraction r, const ImuState& x) { return error_G(r, VinsState{x, {}}); }

PropagationResult propagate_imu_block(Retraction r, const ImuState& x0,
                                      std::span<const ImuSample> imu, const Gravity& g,
                                      const ImuNoise& Q) {
  PropagationResult out;
  out.trajectory = propagate_mean_trajectory(x0, imu, g);
  const JacobianFn F = [&](const StagePoint& sp) { return imu_error_F(r, sp.state, sp.input, g); };
  const JacobianFn G = [&](const StagePoint& sp) { return imu_error_G(r, sp.state); };
  std::vector<MatrixXd> substeps;
  out.phi = transition_matrix(F, out.trajectory, kImuDim, &substeps);
  out.qd = discrete_noise(G, Q, out.trajectory, substeps);
  return out;
}

// ---- VinsFilter ---------------------------------------------------------------

VinsFilter::VinsFilter(Retraction retraction, CameraModel cam, Gravity gravity, NoiseConfig noise,
                       GaussianBelief<VinsState> initial)
    : retraction_(retraction),
      cam_(std::move(cam)),
      gravity_(std::move(gravity)),
      noise_(std::move(noise)),
      belief_(std::move(initial)) {
  if (belief_.cov.rows() != belief_.mean.error_dim() ||
      belief_.cov.cols() != belief_.mean.error_dim()) {
    throw ContractError("VinsFilter: covariance does not match the state dimension");
  }
}

StepRecord VinsFilter::propagate(std::span<const ImuSample> imu) {
  const int n = belief_.mean.error_dim();
  const std::vector<Vec3>& landmarks = belief_.mean.landmarks;
  const MeanTrajectory traj = propagate_mean_trajectory(belief_.mean.imu, imu, gravity_);
  const JacobianFn F = [&](const StagePoint& sp) {
    return error_F(retraction_, VinsState{sp.state, landmarks}, sp.input, gravity_);
  };
  const JacobianFn G = [&](const StagePoint& sp) {
    return error_G(retraction_, VinsState{sp.state, landmarks});
  };
  StepRecord rec;
  std::vector<MatrixXd> substeps;
  rec.phi = transition_matrix(F, traj, n, &substeps);
  rec.qd = discrete_noise(G, noise_.Q, traj, substeps);
  belief_.mean.imu = traj.final_state();
  belief_.cov = rec.phi * belief_.cov * rec.phi.transpose() + rec.qd;
  symmetrize(belief_.cov);
  rec.predicted = belief_;
  rec.H = MatrixXd::Zero(0, n);
  return rec;
}

void VinsFilter::update(std::span<const Measurement> frame, StepRecord& rec) {
  const int n = belief_.mean.error_dim();
  std::vector<Eigen::Vector2d> residuals;
  std::vector<MatrixXd> rows;
  rec.used_landmarks.clear();
  for (const Measurement& m : frame) {
    const Vec3 fI = landmark_in_imu(belief_.mean, m.landmark_id);
    const Vec3 xc = pose_transform_point(cam_.T_CI, fI);
    if (xc.z() <= kMinDepth) continue;
    residuals.push_back(m.uv - project_camera_point(cam_, xc));
    rows.push_back(measurement_H(retraction_, belief_.mean, cam_, m.landmark_id));
    rec.used_landmarks.push_back(m.landmark_id);
  }
  const int m = 2 * static_cast<int>(rows.size());
  MatrixXd H(m, n);
  VectorXd r(m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    H.middleRows(2 * i, 2) = rows[i];
    r.segment<2>(2 * i) = residuals[i];
  }
  rec.H = H;
  if (m == 0) return;
  const double var = noise_.pixel_sigma * noise_.pixel_sigma;
  const MatrixXd V = var * MatrixXd::Identity(m, m);
  auto res = ekf_update(belief_, H, r, V, retraction_);
  rec.updated = res.accepted;
  rec.K = res.gain;
  belief_ = std::move(res.belief);
}

StepRecord VinsFilter::step(std::span<const ImuSample> imu, std::span<const Measurement> frame) {
  StepRecord rec = propagate(imu);
  update(frame, rec);
  return rec;
}

}  // namespace ivins
