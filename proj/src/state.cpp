#include "ivins/state.hpp"

#include <numbers>
#include <stdexcept>
#include <string>

#include "ivins/errors.hpp"

namespace ivins {

namespace {

using Vec15 = Eigen::Matrix<double, 15, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

void require_dim(const VectorXd& e, int dim, const char* who) {
  if (e.size() != dim) {
    throw ContractError(std::string(who) + ": error vector has dimension " +
                        std::to_string(e.size()) + ", expected " + std::to_string(dim));
  }
}

Vec3 checked_log(const Mat3& rel, const char* who) {
  if (rotation_angle(rel) >= std::numbers::pi - 1e-9) {
    throw std::domain_error(std::string(who) + ": relative rotation angle reaches pi");
  }
  return log_so3(rel);
}

Mat3 gravity_rotation(const UnobsTransform& t, const Gravity& g, double extra) {
  return exp_so3(g.direction() * (t.yaw + extra));
}

}  // namespace

// ---- IMU / pose pieces ------------------------------------------------------

ImuState imu_retract(const ImuState& x, const Vec15& e) {
  const Vec3 th = e.segment<3>(kTheta);
  const Mat3 dR = exp_so3(th);
  const Mat3 J = left_jacobian(th);
  ImuState out;
  out.R = dR * x.R;
  out.v = dR * x.v + J * e.segment<3>(kVel);
  out.p = dR * x.p + J * e.segment<3>(kPos);
  out.bg = x.bg + e.segment<3>(kBg);
  out.ba = x.ba + e.segment<3>(kBa);
  return out;
}

Vec15 imu_inverse_retract(const ImuState& x, const ImuState& xhat) {
  Vec15 e;
  const Vec3 th = checked_log(x.R * xhat.R.transpose(), "imu_inverse_retract");
  const Mat3 dR = exp_so3(th);
  const Mat3 Jinv = left_jacobian_inverse(th);
  e.segment<3>(kTheta) = th;
  e.segment<3>(kVel) = Jinv * (x.v - dR * xhat.v);
  e.segment<3>(kPos) = Jinv * (x.p - dR * xhat.p);
  e.segment<3>(kBg) = x.bg - xhat.bg;
  e.segment<3>(kBa) = x.ba - xhat.ba;
  return e;
}

ImuState conventional_imu_retract(const ImuState& x, const Vec15& e) {
  ImuState out;
  out.R = x.R * exp_so3(e.segment<3>(kTheta));
  out.v = x.v + e.segment<3>(kVel);
  out.p = x.p + e.segment<3>(kPos);
  out.bg = x.bg + e.segment<3>(kBg);
  out.ba = x.ba + e.segment<3>(kBa);
  return out;
}

Vec15 conventional_imu_inverse_retract(const ImuState& x, const ImuState& xhat) {
  Vec15 e;
  e.segment<3>(kTheta) = checked_log(xhat.R.transpose() * x.R, "conventional_imu_inverse_retract");
  e.segment<3>(kVel) = x.v - xhat.v;
  e.segment<3>(kPos) = x.p - xhat.p;
  e.segment<3>(kBg) = x.bg - xhat.bg;
  e.segment<3>(kBa) = x.ba - xhat.ba;
  return e;
}

Pose pose_retract(const Pose& c, const Vec6& e) {
  const Vec3 th = e.head<3>();
  const Mat3 dR = exp_so3(th);
  return {dR * c.rotation, dR * c.translation + left_jacobian(th) * e.tail<3>()};
}

Vec6 pose_inverse_retract(const Pose& c, const Pose& chat) {
  Vec6 e;
  const Vec3 th = checked_log(c.rotation * chat.rotation.transpose(), "pose_inverse_retract");
  e.head<3>() = th;
  e.tail<3>() = left_jacobian_inverse(th) * (c.translation - exp_so3(th) * chat.translation);
  return e;
}

Pose conventional_pose_retract(const Pose& c, const Vec6& e) {
  return {c.rotation * exp_so3(e.head<3>()), c.translation + e.tail<3>()};
}

Vec6 conventional_pose_inverse_retract(const Pose& c, const Pose& chat) {
  Vec6 e;
  e.head<3>() = checked_log(chat.rotation.transpose() * c.rotation,
                            "conventional_pose_inverse_retract");
  e.tail<3>() = c.translation - chat.translation;
  return e;
}

std::pair<Pose, Vec3> anchored_landmark_retract(const Pose& c, const Vec3& f,
                                                const Eigen::Matrix<double, 9, 1>& e) {
  const Vec3 th = e.head<3>();
  const Pose pose = pose_retract(c, e.head<6>());
  const Vec3 landmark = exp_so3(th) * f + left_jacobian(th) * e.tail<3>();
  return {pose, landmark};
}

// ---- VINS state ----------------------------------------------------------

VinsState conekf_retract(const VinsState& xhat, const VectorXd& e) {
  require_dim(e, xhat.error_dim(), "conekf_retract");
  VinsState out;
  out.imu = conventional_imu_retract(xhat.imu, e.head<kImuDim>());
  out.landmarks.reserve(xhat.landmarks.size());
  for (std::size_t i = 0; i < xhat.landmarks.size(); ++i) {
    out.landmarks.push_back(xhat.landmarks[i] + e.segment<3>(kImuDim + 3 * i));
  }
  return out;
}

VectorXd conekf_inverse_retract(const VinsState& x, const VinsState& xhat) {
  if (x.landmarks.size() != xhat.landmarks.size()) {
    throw ContractError("conekf_inverse_retract: landmark counts differ");
  }
  VectorXd e(xhat.error_dim());
  e.head<kImuDim>() = conventional_imu_inverse_retract(x.imu, xhat.imu);
  for (std::size_t i = 0; i < x.landmarks.size(); ++i) {
    e.segment<3>(kImuDim + 3 * i) = x.landmarks[i] - xhat.landmarks[i];
  }
  return e;
}

VinsState riekf_retract(const VinsState& xhat, const VectorXd& e) {
  require_dim(e, xhat.error_dim(), "riekf_retract");
  const Vec3 th = e.segment<3>(kTheta);
  const Mat3 dR = exp_so3(th);
  const Mat3 J = left_jacobian(th);
  VinsState out;
  out.imu = imu_retract(xhat.imu, e.head<kImuDim>());
  out.landmarks.reserve(xhat.landmarks.size());
  for (std::size_t i = 0; i < xhat.landmarks.size(); ++i) {
    out.landmarks.push_back(dR * xhat.landmarks[i] + J * e.segment<3>(kImuDim + 3 * i));
  }
  return out;
}

VectorXd riekf_inverse_retract(const VinsState& x, const VinsState& xhat) {
  if (x.landmarks.size() != xhat.landmarks.size()) {
    throw ContractError("riekf_inverse_retract: landmark counts differ");
  }
  VectorXd e(xhat.error_dim());
  e.head<kImuDim>() = imu_inverse_retract(x.imu, xhat.imu);
  const Vec3 th = e.segment<3>(kTheta);
  const Mat3 dR = exp_so3(th);
  const Mat3 Jinv = left_jacobian_inverse(th);
  for (std::size_t i = 0; i < x.landmarks.size(); ++i) {
    e.segment<3>(kImuDim + 3 * i) = Jinv * (x.landmarks[i] - dR * xhat.landmarks[i]);
  }
  return e;
}

VinsState retract(Retraction r, const VinsState& xhat, const VectorXd& e) {
  return r == Retraction::kRightInvariant ? riekf_retract(xhat, e) : conekf_retract(xhat, e);
}

VectorXd inverse_retract(Retraction r, const VinsState& x, const VinsState& xhat) {
  return r == Retraction::kRightInvariant ? riekf_inverse_retract(x, xhat)
                                          : conekf_inverse_retract(x, xhat);
}

// ---- sliding-window state --------------------------------------------------

MsckfState retract(Retraction r, const MsckfState& xhat, const VectorXd& e) {
  require_dim(e, xhat.error_dim(), "retract(MsckfState)");
  const bool ri = r == Retraction::kRightInvariant;
  MsckfState out;
  out.imu = ri ? imu_retract(xhat.imu, e.head<kImuDim>())
               : conventional_imu_retract(xhat.imu, e.head<kImuDim>());
  out.clones.reserve(xhat.clones.size());
  for (std::size_t i = 0; i < xhat.clones.size(); ++i) {
    const Vec6 ec = e.segment<kCloneDim>(kImuDim + kCloneDim * i);
    const Pose& c = xhat.clones[i].pose;
    out.clones.push_back({xhat.clones[i].t, ri ? pose_retract(c, ec) : conventional_pose_retract(c, ec)});
  }
  return out;
}

VectorXd inverse_retract(Retraction r, const MsckfState& x, const MsckfState& xhat) {
  if (x.clones.size() != xhat.clones.size()) {
    throw ContractError("inverse_retract(MsckfState): clone counts differ");
  }
  const bool ri = r == Retraction::kRightInvariant;
  VectorXd e(xhat.error_dim());
  e.head<kImuDim>() = ri ? imu_inverse_retract(x.imu, xhat.imu)
                         : conventional_imu_inverse_retract(x.imu, xhat.imu);
  for (std::size_t i = 0; i < x.clones.size(); ++i) {
    const Pose& c = x.clones[i].pose;
    const Pose& ch = xhat.clones[i].pose;
    e.segment<kCloneDim>(kImuDim + kCloneDim * i) =
        ri ? pose_inverse_retract(c, ch) : conventional_pose_inverse_retract(c, ch);
  }
  return e;
}

// ---- unobservable transformations ---------------------------------------------

namespace {

struct RigidMap {
  Mat3 rotation;
  Vec3 translation;

  ImuState apply(const ImuState& x) const {
    ImuState y = x;
    y.R = rotation * x.R;
    y.v = rotation * x.v;
    y.p = rotation * x.p + translation;
    return y;
  }
  Vec3 apply(const Vec3& f) const { return rotation * f + translation; }
  Pose apply(const Pose& c) const {
    return {rotation * c.rotation, rotation * c.translation + translation};
  }
};

RigidMap make_map(const UnobsTransform& t, const Gravity& g,
                  const std::optional<Eigen::Vector4d>& eps) {
  const double e1 = eps ? (*eps)(0) : 0.0;
  const Vec3 e2 = eps ? Vec3(eps->tail<3>()) : Vec3::Zero();
  return {gravity_rotation(t, g, e1), t.translation + e2};
}

}  // namespace

VinsState apply_unobs_transform(const VinsState& x, const UnobsTransform& t, const Gravity& g,
                                const std::optional<Eigen::Vector4d>& eps) {
  const RigidMap m = make_map(t, g, eps);
  VinsState y;
  y.imu = m.apply(x.imu);
  y.landmarks.reserve(x.landmarks.size());
  for (const Vec3& f : x.landmarks) y.landmarks.push_back(m.apply(f));
  return y;
}

MsckfState apply_unobs_transform(const MsckfState& x, const UnobsTransform& t, const Gravity& g,
                                 const std::optional<Eigen::Vector4d>& eps) {
  const RigidMap m = make_map(t, g, eps);
  MsckfState y;
  y.imu = m.apply(x.imu);
  y.clones.reserve(x.clones.size());
  for (const Clone& c : x.clones) y.clones.push_back({c.t, m.apply(c.pose)});
  return y;
}

UnobsTransform inverse_transform(const UnobsTransform& t, const Gravity& g) {
  UnobsTransform inv;
  inv.yaw = -t.yaw;
  inv.translation = -(gravity_rotation(t, g, 0.0).transpose() * t.translation);
  inv.sigma = t.sigma;
  return inv;
}

// ---- transformation Jacobians ----------------------------------------------------

namespace {

template <class State>
TransformJacobians numeric_jacobians(const State& xhat, const UnobsTransform& t, Retraction r,
                                     const Gravity& g) {
  const int n = xhat.error_dim();
  const double h = kFiniteDiffStep;
  const State y = apply_unobs_transform(xhat, t, g);
  TransformJacobians out;
  out.M.resize(n, n);
  for (int j = 0; j < n; ++j) {
    VectorXd e = VectorXd::Zero(n);
    e(j) = h;
    const VectorXd plus = inverse_retract(r, apply_unobs_transform(retract(r, xhat, e), t, g), y);
    e(j) = -h;
    const VectorXd minus = inverse_retract(r, apply_unobs_transform(retract(r, xhat, e), t, g), y);
    out.M.col(j) = (plus - minus) / (2.0 * h);
  }
  out.N.resize(n, 4);
  for (int j = 0; j < 4; ++j) {
    Eigen::Vector4d eps = Eigen::Vector4d::Zero();
    eps(j) = h;
    const VectorXd plus = inverse_retract(r, apply_unobs_transform(xhat, t, g, eps), y);
    eps(j) = -h;
    const VectorXd minus = inverse_retract(r, apply_unobs_transform(xhat, t, g, eps), y);
    out.N.col(j) = (plus - minus) / (2.0 * h);
  }
  return out;
}

// Fills the IMU 15x15 / 15x4 blocks of W and N. y is the transformed IMU state.
void imu_blocks(const ImuState& y, const UnobsTransform& t, Retraction r, const Gravity& g,
                MatrixXd& W, MatrixXd& N) {
  const Mat3 dR = gravity_rotation(t, g, 0.0);
  const Vec3 u = g.direction();
  const Mat3 I = Mat3::Identity();
  W.block<3, 3>(kBg, kBg) = I;
  W.block<3, 3>(kBa, kBa) = I;
  if (r == Retraction::kRightInvariant) {
    W.block<3, 3>(kTheta, kTheta) = dR;
    W.block<3, 3>(kVel, kVel) = dR;
    W.block<3, 3>(kPos, kTheta) = skew(t.translation) * dR;
    W.block<3, 3>(kPos, kPos) = dR;
    N.block<3, 1>(kTheta, 0) = u;
    N.block<3, 1>(kPos, 0) = skew(t.translation) * u;
  } else {
    W.block<3, 3>(kTheta, kTheta) = I;
    W.block<3, 3>(kVel, kVel) = dR;
    W.block<3, 3>(kPos, kPos) = dR;
    N.block<3, 1>(kTheta, 0) = y.R.transpose() * u;
    N.block<3, 1>(kVel, 0) = skew(u) * y.v;
    N.block<3, 1>(kPos, 0) = skew(u) * (y.p - t.translation);
  }
  N.block<3, 3>(kPos, 1) = I;
}

}  // namespace

TransformJacobians transform_error_jacobians(const VinsState& xhat, const UnobsTransform& t,
                                             Retraction r, const Gravity& g) {
  return numeric_jacobians(xhat, t, r, g);
}

TransformJacobians transform_error_jacobians(const MsckfState& xhat, const UnobsTransform& t,
                                             Retraction r, const Gravity& g) {
  return numeric_jacobians(xhat, t, r, g);
}

TransformJacobians analytic_transform_jacobians(const VinsState& xhat, const UnobsTransform& t,
                                                Retraction r, const Gravity& g) {
  const int n = xhat.error_dim();
  const VinsState y = apply_unobs_transform(xhat, t, g);
  const Mat3 dR = gravity_rotation(t, g, 0.0);
  const Vec3 u = g.direction();
  TransformJacobians out{MatrixXd::Zero(n, n), MatrixXd::Zero(n, 4)};
  imu_blocks(y.imu, t, r, g, out.M, out.N);
  for (std::size_t i = 0; i < y.landmarks.size(); ++i) {
    const int k = kImuDim + 3 * static_cast<int>(i);
    out.M.block<3, 3>(k, k) = dR;
    out.N.block<3, 3>(k, 1) = Mat3::Identity();
    if (r == Retraction::kRightInvariant) {
      out.M.block<3, 3>(k, kTheta) = skew(t.translation) * dR;
      out.N.block<3, 1>(k, 0) = skew(t.translation) * u;
    } else {
      out.N.block<3, 1>(k, 0) = skew(u) * (y.landmarks[i] - t.translation);
    }
  }
  return out;
}

TransformJacobians analytic_transform_jacobians(const MsckfState& xhat, const UnobsTransform& t,
                                                Retraction r, const Gravity& g) {
  const int n = xhat.error_dim();
  const MsckfState y = apply_unobs_transform(xhat, t, g);
  const Mat3 dR = gravity_rotation(t, g, 0.0);
  const Vec3 u = g.direction();
  TransformJacobians out{MatrixXd::Zero(n, n), MatrixXd::Zero(n, 4)};
  imu_blocks(y.imu, t, r, g, out.M, out.N);
  for (std::size_t i = 0; i < y.clones.size(); ++i) {
    const int k = kImuDim + kCloneDim * static_cast<int>(i);
    const Pose& c = y.clones[i].pose;
    out.M.block<3, 3>(k + 3, k + 3) = dR;
    out.N.block<3, 3>(k + 3, 1) = Mat3::Identity();
    if (r == Retraction::kRightInvariant) {
      out.M.block<3, 3>(k, k) = dR;
      out.M.block<3, 3>(k + 3, k) = skew(t.translation) * dR;
      out.N.block<3, 1>(k, 0) = u;
      out.N.block<3, 1>(k + 3, 0) = skew(t.translation) * u;
    } else {
      out.M.block<3, 3>(k, k) = Mat3::Identity();
      out.N.block<3, 1>(k, 0) = c.rotation.transpose() * u;
      out.N.block<3, 1>(k + 3, 0) = skew(u) * (c.translation - t.translation);
    }
  }
  return out;
}

}  // namespace ivins
