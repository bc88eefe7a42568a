#include "ivins/lie.hpp"

#include <cmath>
#include <numbers>

namespace ivins {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) {
  return 0.5 * Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

Mat3 exp_so3(const Vec3& y) {
  const double t = y.norm();
  const Mat3 S = skew(y);
  double a, b;
  if (t < kSmallAngle) {
    const double t2 = t * t;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / (t * t);
  }
  return Mat3::Identity() + a * S + b * S * S;
}

double rotation_angle(const Mat3& R) {
  const double c = 0.5 * (R.trace() - 1.0);
  const double s = vee(R).norm();
  return std::atan2(s, c);
}

Vec3 log_so3(const Mat3& R) {
  const double angle = rotation_angle(R);
  const Vec3 w = vee(R);
  if (angle < kSmallAngle) {
    // sin(t)/t ~ 1 - t^2/6
    return w * (1.0 + angle * angle / 6.0);
  }
  if (std::numbers::pi - angle < 1e-6) {
    // R + I = 2 a a^T at angle pi; take the column with the largest diagonal.
    const Mat3 B = R + Mat3::Identity();
    int k = 0;
    B.diagonal().maxCoeff(&k);
    Vec3 axis = B.col(k).normalized();
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
    return angle * axis;
  }
  return w * (angle / std::sin(angle));
}

Mat3 right_jacobian(const Vec3& y) {
  const double t = y.norm();
  const Mat3 S = skew(y);
  double a, b;
  if (t < kSmallAngle) {
    const double t2 = t * t;
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    a = (1.0 - std::cos(t)) / (t * t);
    b = (t - std::sin(t)) / (t * t * t);
  }
  return Mat3::Identity() - a * S + b * S * S;
}

Mat3 right_jacobian_inverse(const Vec3& y) {
  const double t = y.norm();
  const Mat3 S = skew(y);
  double b;
  if (t < kSmallAngle) {
    b = 1.0 / 12.0 + t * t / 720.0;
  } else {
    b = 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
  }
  return Mat3::Identity() + 0.5 * S + b * S * S;
}

Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose pose_inverse(const Pose& a) {
  const Mat3 rt = a.rotation.transpose();
  return {rt, -rt * a.translation};
}

Vec3 pose_transform_point(const Pose& a, const Vec3& x) {
  return a.rotation * x + a.translation;
}

}  // namespace ivins
