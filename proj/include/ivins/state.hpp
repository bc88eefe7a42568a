#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ivins/lie.hpp"

namespace ivins {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kImuDim = 15;
inline constexpr int kCloneDim = 6;

// Error-vector block offsets inside the IMU part: [theta, v, p, b_g, b_a].
inline constexpr int kTheta = 0;
inline constexpr int kVel = 3;
inline constexpr int kPos = 6;
inline constexpr int kBg = 9;
inline constexpr int kBa = 12;

struct Gravity {
  Vec3 g{0.0, 0.0, -9.81};
  Vec3 direction() const { return g.normalized(); }
};

struct ImuState {
  Mat3 R = Mat3::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 bg = Vec3::Zero();
  Vec3 ba = Vec3::Zero();
};

/// IMU state plus L global landmark positions; error dimension 15 + 3L.
struct VinsState {
  ImuState imu;
  std::vector<Vec3> landmarks;

  int error_dim() const { return kImuDim + 3 * static_cast<int>(landmarks.size()); }
};

struct Clone {
  double t = 0.0;
  Pose pose;  // camera-to-world
};

/// IMU state plus a sliding window of camera clones; error dimension 15 + 6m.
struct MsckfState {
  ImuState imu;
  std::vector<Clone> clones;

  int error_dim() const { return kImuDim + kCloneDim * static_cast<int>(clones.size()); }
};

template <class State>
struct GaussianBelief {
  State mean;
  MatrixXd cov;
};

/// Which uncertainty representation a filter uses.
enum class Retraction {
  kConventional,    // R = R^ exp(e), additive everything else
  kRightInvariant,  // R = exp(e) R^, vectors rotated with J_l corrections
};

/// Translation plus rotation about gravity. sigma is the covariance of the
/// perturbation [eps_yaw, eps_translation].
struct UnobsTransform {
  double yaw = 0.0;
  Vec3 translation = Vec3::Zero();
  Eigen::Matrix4d sigma = Eigen::Matrix4d::Zero();
};

// ---- retractions on the full VINS state ----------------------------------

VinsState conekf_retract(const VinsState& xhat, const VectorXd& e);
VectorXd conekf_inverse_retract(const VinsState& x, const VinsState& xhat);
VinsState riekf_retract(const VinsState& xhat, const VectorXd& e);
VectorXd riekf_inverse_retract(const VinsState& x, const VinsState& xhat);

VinsState retract(Retraction r, const VinsState& xhat, const VectorXd& e);
VectorXd inverse_retract(Retraction r, const VinsState& x, const VinsState& xhat);

// ---- sub-retractions -----------------------------------------------------

/// Right-invariant IMU retraction (first five blocks of riekf_retract).
ImuState imu_retract(const ImuState& xbar, const Eigen::Matrix<double, 15, 1>& e);
Eigen::Matrix<double, 15, 1> imu_inverse_retract(const ImuState& x, const ImuState& xhat);

ImuState conventional_imu_retract(const ImuState& xbar, const Eigen::Matrix<double, 15, 1>& e);
Eigen::Matrix<double, 15, 1> conventional_imu_inverse_retract(const ImuState& x,
                                                              const ImuState& xhat);

/// Right-invariant pose retraction, error ordering [theta, p].
Pose pose_retract(const Pose& c, const Eigen::Matrix<double, 6, 1>& e);
Eigen::Matrix<double, 6, 1> pose_inverse_retract(const Pose& c, const Pose& chat);

Pose conventional_pose_retract(const Pose& c, const Eigen::Matrix<double, 6, 1>& e);
Eigen::Matrix<double, 6, 1> conventional_pose_inverse_retract(const Pose& c, const Pose& chat);

/// Landmark error coupled with its anchor pose, ordering [theta, p, f].
std::pair<Pose, Vec3> anchored_landmark_retract(const Pose& c, const Vec3& f,
                                                const Eigen::Matrix<double, 9, 1>& e);

// ---- retractions on the sliding-window state -----------------------------

MsckfState retract(Retraction r, const MsckfState& xhat, const VectorXd& e);
VectorXd inverse_retract(Retraction r, const MsckfState& x, const MsckfState& xhat);

// ---- unobservable transformations ----------------------------------------

/// Applies the rotation exp(u (yaw + eps0)) about the unit gravity direction u
/// and the translation (translation + eps[1:4]). Deterministic when eps is empty.
VinsState apply_unobs_transform(const VinsState& x, const UnobsTransform& t, const Gravity& g,
                                const std::optional<Eigen::Vector4d>& eps = std::nullopt);
MsckfState apply_unobs_transform(const MsckfState& x, const UnobsTransform& t, const Gravity& g,
                                 const std::optional<Eigen::Vector4d>& eps = std::nullopt);

/// Inverse of the deterministic transform.
UnobsTransform inverse_transform(const UnobsTransform& t, const Gravity& g);

struct TransformJacobians {
  MatrixXd M;  // d[T_D(x ⊕ e) ⊖ T_D(x)] / de
  MatrixXd N;  // d[T_S(x) ⊖ T_D(x)] / d eps, evaluated at T_D(x)
};

inline constexpr double kFiniteDiffStep = 1e-6;

/// Central finite differences of the two maps above.
TransformJacobians transform_error_jacobians(const VinsState& xhat, const UnobsTransform& t,
                                             Retraction r, const Gravity& g);
TransformJacobians transform_error_jacobians(const MsckfState& xhat, const UnobsTransform& t,
                                             Retraction r, const Gravity& g);

/// Closed forms. M is state independent for both retractions; N depends on the
/// transformed state only for the conventional retraction.
TransformJacobians analytic_transform_jacobians(const VinsState& xhat, const UnobsTransform& t,
                                                Retraction r, const Gravity& g);
TransformJacobians analytic_transform_jacobians(const MsckfState& xhat, const UnobsTransform& t,
                                                Retraction r, const Gravity& g);

}  // namespace ivins
