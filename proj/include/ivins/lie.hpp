#pragma once

#include <Eigen/Dense>

namespace ivins {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Angles below this use the series expansion of the exp / J_r coefficients.
inline constexpr double kSmallAngle = 1e-6;

/// Skew-symmetric matrix with skew(v) * y == v.cross(y).
Mat3 skew(const Vec3& v);

/// Inverse of skew(); reads the antisymmetric part of m.
Vec3 vee(const Mat3& m);

/// Rodrigues formula.
Mat3 exp_so3(const Vec3& y);

/// Angle-axis vector with angle in [0, pi]. Near pi the axis sign is chosen so
/// that its first nonzero component is positive.
Vec3 log_so3(const Mat3& R);

/// Rotation angle of R in [0, pi], computed with atan2 for accuracy at both ends.
double rotation_angle(const Mat3& R);

Mat3 right_jacobian(const Vec3& y);
Mat3 right_jacobian_inverse(const Vec3& y);

/// Left Jacobian, J_l(y) = J_r(-y).
inline Mat3 left_jacobian(const Vec3& y) { return right_jacobian(-y); }
inline Mat3 left_jacobian_inverse(const Vec3& y) { return right_jacobian_inverse(-y); }

/// Rotation about a unit axis; used for the analytic trajectory.
Mat3 rot_x(double a);
Mat3 rot_y(double a);
Mat3 rot_z(double a);

/// Re-orthonormalise a nearly orthogonal matrix (polar factor via SVD).
/// Filters never re-project.
Mat3 project_to_so3(const Mat3& m);

/// Rigid transform x -> rotation * x + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
};

Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& a);
Vec3 pose_transform_point(const Pose& a, const Vec3& x);

}  // namespace ivins
