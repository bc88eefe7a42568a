#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ivins/state.hpp"

namespace ivins {

struct ImuSample {
  double t = 0.0;
  Vec3 omega = Vec3::Zero();  // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2, specific force
};

using ImuNoise = Eigen::Matrix<double, 12, 12>;

/// Continuous-time IMU noise densities, blocks ordered [n_g, n_bg, n_a, n_ba],
/// and isotropic pixel noise.
struct NoiseConfig {
  ImuNoise Q = ImuNoise::Zero();
  double pixel_sigma = 1.5;

  static NoiseConfig from_sigmas(double gyro, double gyro_walk, double accel, double accel_walk,
                                 double pixel_sigma);
};

struct Measurement {
  double t = 0.0;
  int landmark_id = 0;
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
};

/// Point where the linearisation is evaluated: an RK4 stage state and the
/// (interpolated) IMU reading at that stage.
struct StagePoint {
  ImuState state;
  ImuSample input;
};

/// Noise-free mean propagation over one interval, keeping every RK4 stage so
/// the transition matrix and the noise integral see the same linearisation
/// points as the mean.
struct MeanTrajectory {
  std::vector<double> dt;                           // per substep
  std::vector<std::array<StagePoint, 4>> stages;    // per substep
  std::vector<StagePoint> nodes;                    // substep boundaries (size = substeps + 1)

  const ImuState& final_state() const { return nodes.back().state; }
};

/// Continuous dynamics of the IMU mean: R' = R S(w - bg), v' = R (a - ba) + g, p' = v.
ImuState imu_derivative(const ImuState& x, const ImuSample& u, const Gravity& g);

/// RK4 at the IMU sample period; the midpoint input is interpolated from the
/// neighbouring samples (cubic where four are available). Needs at least two
/// samples (interval endpoints).
MeanTrajectory propagate_mean_trajectory(const ImuState& x0, std::span<const ImuSample> imu,
                                         const Gravity& g);
ImuState propagate_mean(const ImuState& x0, std::span<const ImuSample> imu, const Gravity& g);
VinsState propagate_mean(const VinsState& x0, std::span<const ImuSample> imu, const Gravity& g);

/// Evaluates F (n x n) or G (n x 12) at a linearisation point.
using JacobianFn = std::function<MatrixXd(const StagePoint&)>;

/// Integrates d/dt Phi = F Phi with RK4 on the trajectory's substeps. The
/// per-substep transitions are written to substep_phis when requested.
MatrixXd transition_matrix(const JacobianFn& F, const MeanTrajectory& traj, int dim,
                           std::vector<MatrixXd>* substep_phis = nullptr);

/// Trapezoidal quadrature of int Phi(t1, s) G Q G^T Phi(t1, s)^T ds over the
/// substeps, using the per-substep transitions from transition_matrix.
MatrixXd discrete_noise(const JacobianFn& G, const ImuNoise& Q, const MeanTrajectory& traj,
                        const std::vector<MatrixXd>& substep_phis);

inline void symmetrize(MatrixXd& P) { P = 0.5 * (P + P.transpose()).eval(); }

/// Condition number above which the innovation covariance is treated as singular.
inline constexpr double kMaxInnovationCondition = 1e12;

template <class State>
struct UpdateResult {
  GaussianBelief<State> belief;
  MatrixXd gain;
  VectorXd correction;
  bool accepted = false;
  double condition = 0.0;
};

/// Kalman correction with residual r = z - h(mean): mean <- mean ⊕ K r,
/// P <- (I - K H) P, then symmetrised. A singular innovation covariance leaves
/// the belief unchanged and reports accepted = false.
UpdateResult<VinsState> ekf_update(const GaussianBelief<VinsState>& belief, const MatrixXd& H,
                                   const VectorXd& r, const MatrixXd& V, Retraction retraction);
UpdateResult<MsckfState> ekf_update(const GaussianBelief<MsckfState>& belief, const MatrixXd& H,
                                    const VectorXd& r, const MatrixXd& V, Retraction retraction);

}  // namespace ivins
