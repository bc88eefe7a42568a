#include "ivins/ekf.hpp"

#include <algorithm>
#include <limits>

#include "ivins/errors.hpp"

namespace ivins {

NoiseConfig NoiseConfig::from_sigmas(double gyro, double gyro_walk, double accel,
                                     double accel_walk, double pixel_sigma) {
  NoiseConfig n;
  n.Q.diagonal() << Vec3::Constant(gyro * gyro), Vec3::Constant(gyro_walk * gyro_walk),
      Vec3::Constant(accel * accel), Vec3::Constant(accel_walk * accel_walk);
  n.pixel_sigma = pixel_sigma;
  return n;
}

ImuState imu_derivative(const ImuState& x, const ImuSample& u, const Gravity& g) {
  ImuState d;
  d.R = x.R * skew(u.omega - x.bg);
  d.v = x.R * (u.accel - x.ba) + g.g;
  d.p = x.v;
  d.bg.setZero();
  d.ba.setZero();
  return d;
}

namespace {

ImuState axpy(const ImuState& x, double h, const ImuState& d) {
  ImuState y;
  y.R = x.R + h * d.R;
  y.v = x.v + h * d.v;
  y.p = x.p + h * d.p;
  y.bg = x.bg + h * d.bg;
  y.ba = x.ba + h * d.ba;
  return y;
}

// Lagrange interpolation of the input at the centre of [t_k, t_k+1], through
// up to four samples around the interval (cubic inside, quadratic at the ends).
ImuSample midpoint(std::span<const ImuSample> imu, std::size_t k) {
  const double tm = 0.5 * (imu[k].t + imu[k + 1].t);
  std::size_t lo = k > 0 ? k - 1 : k;
  std::size_t hi = std::min(k + 2, imu.size() - 1);
  ImuSample out{tm, Vec3::Zero(), Vec3::Zero()};
  for (std::size_t i = lo; i <= hi; ++i) {
    double w = 1.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j != i) w *= (tm - imu[j].t) / (imu[i].t - imu[j].t);
    }
    out.omega += w * imu[i].omega;
    out.accel += w * imu[i].accel;
  }
  return out;
}

}  // namespace

MeanTrajectory propagate_mean_trajectory(const ImuState& x0, std::span<const ImuSample> imu,
                                         const Gravity& g) {
  if (imu.size() < 2) {
    throw ContractError("propagate_mean: IMU stream must contain both interval endpoints");
  }
  MeanTrajectory traj;
  const std::size_t steps = imu.size() - 1;
  traj.dt.reserve(steps);
  traj.stages.reserve(steps);
  traj.nodes.reserve(steps + 1);
  ImuState x = x0;
  traj.nodes.push_back({x, imu[0]});
  for (std::size_t k = 0; k < steps; ++k) {
    const ImuSample& u0 = imu[k];
    const ImuSample& u1 = imu[k + 1];
    const double h = u1.t - u0.t;
    if (!(h > 0.0)) throw ContractError("propagate_mean: IMU timestamps must increase");
    const ImuSample um = midpoint(imu, k);

    std::array<StagePoint, 4> st;
    st[0] = {x, u0};
    const ImuState k1 = imu_derivative(st[0].state, u0, g);
    st[1] = {axpy(x, 0.5 * h, k1), um};
    const ImuState k2 = imu_derivative(st[1].state, um, g);
    st[2] = {axpy(x, 0.5 * h, k2), um};
    const ImuState k3 = imu_derivative(st[2].state, um, g);
    st[3] = {axpy(x, h, k3), u1};
    const ImuState k4 = imu_derivative(st[3].state, u1, g);

    ImuState next;
    next.R = x.R + (h / 6.0) * (k1.R + 2.0 * k2.R + 2.0 * k3.R + k4.R);
    next.v = x.v + (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    next.p = x.p + (h / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
    next.bg = x.bg;
    next.ba = x.ba;
    x = next;

    traj.dt.push_back(h);
    traj.stages.push_back(st);
    traj.nodes.push_back({x, u1});
  }
  return traj;
}

ImuState propagate_mean(const ImuState& x0, std::span<const ImuSample> imu, const Gravity& g) {
  return propagate_mean_trajectory(x0, imu, g).final_state();
}

VinsState propagate_mean(const VinsState& x0, std::span<const ImuSample> imu, const Gravity& g) {
  VinsState x = x0;
  x.imu = propagate_mean(x0.imu, imu, g);
  return x;
}

MatrixXd transition_matrix(const JacobianFn& F, const MeanTrajectory& traj, int dim,
                           std::vector<MatrixXd>* substep_phis) {
  MatrixXd phi = MatrixXd::Identity(dim, dim);
  if (substep_phis) substep_phis->clear();
  for (std::size_t k = 0; k < traj.dt.size(); ++k) {
    const double h = traj.dt[k];
    const auto& st = traj.stages[k];
    const MatrixXd F1 = F(st[0]);
    const MatrixXd F2 = F(st[1]);
    const MatrixXd F3 = F(st[2]);
    const MatrixXd F4 = F(st[3]);
    // Transition over this substep from the identity.
    const MatrixXd k1 = F1;
    const MatrixXd k2 = F2 + (0.5 * h) * (F2 * k1);
    const MatrixXd k3 = F3 + (0.5 * h) * (F3 * k2);
    const MatrixXd k4 = F4 + h * (F4 * k3);
    MatrixXd A = MatrixXd::Identity(dim, dim) + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    phi = A * phi;
    if (substep_phis) substep_phis->push_back(std::move(A));
  }
  return phi;
}

MatrixXd discrete_noise(const JacobianFn& G, const ImuNoise& Q, const MeanTrajectory& traj,
                        const std::vector<MatrixXd>& substep_phis) {
  if (substep_phis.size() != traj.dt.size()) {
    throw ContractError("discrete_noise: substep transitions do not match the trajectory");
  }
  MatrixXd Gk = G(traj.nodes.front());
  const int dim = static_cast<int>(Gk.rows());
  MatrixXd Ck = Gk * Q * Gk.transpose();
  MatrixXd Qd = MatrixXd::Zero(dim, dim);
  for (std::size_t k = 0; k < traj.dt.size(); ++k) {
    const double h = traj.dt[k];
    const MatrixXd& A = substep_phis[k];
    const MatrixXd Gn = G(traj.nodes[k + 1]);
    const MatrixXd Cn = Gn * Q * Gn.transpose();
    Qd = A * (Qd + (0.5 * h) * Ck) * A.transpose() + (0.5 * h) * Cn;
    Ck = Cn;
  }
  symmetrize(Qd);
  return Qd;
}

namespace {

template <class State>
UpdateResult<State> update_impl(const GaussianBelief<State>& belief, const MatrixXd& H,
                                const VectorXd& r, const MatrixXd& V, Retraction retraction) {
  const MatrixXd& P = belief.cov;
  const Eigen::Index n = P.rows();
  if (H.cols() != n || H.rows() != r.size() || V.rows() != r.size() || V.cols() != r.size()) {
    throw ContractError("ekf_update: inconsistent dimensions");
  }
  UpdateResult<State> out;
  out.belief = belief;
  if (r.size() == 0) return out;

  const MatrixXd PHt = P * H.transpose();
  MatrixXd S = H * PHt + V;
  symmetrize(S);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(lo > 0.0) || out.condition > kMaxInnovationCondition) return out;

  const Eigen::LDLT<MatrixXd> ldlt(S);
  out.gain = ldlt.solve(PHt.transpose()).transpose();
  out.correction = out.gain * r;
  out.belief.mean = retract(retraction, belief.mean, out.correction);
  out.belief.cov = P - out.gain * (H * P);
  symmetrize(out.belief.cov);
  out.accepted = true;
  return out;
}

}  // namespace

UpdateResult<VinsState> ekf_update(const GaussianBelief<VinsState>& belief, const MatrixXd& H,
                                   const VectorXd& r, const MatrixXd& V, Retraction retraction) {
  return update_impl(belief, H, r, V, retraction);
}

UpdateResult<MsckfState> ekf_update(const GaussianBelief<MsckfState>& belief, const MatrixXd& H,
                                    const VectorXd& r, const MatrixXd& V, Retraction retraction) {
  return update_impl(belief, H, r, V, retraction);
}

}  // namespace ivins
