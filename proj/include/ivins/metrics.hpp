#pragma once

#include <vector>

#include "ivins/state.hpp"

namespace ivins {

/// e^T P^-1 e through an LDLT factorisation. Throws ContractError on
/// mismatched sizes or when P is not positive definite.
double nees(const VectorXd& e, const MatrixXd& P);

struct StepMetrics {
  double err_ori = 0.0;  // rad, |log(R^T R^)|
  double err_pos = 0.0;  // m, |p - p^|
  double nees_ori = 0.0;
  double nees_pose = 0.0;
};

/// Errors of one estimate against the truth. NEES uses the filter's own
/// inverse retraction and the [theta, p] blocks of the IMU covariance; both NEES
/// values are NaN when that block is not positive definite (e.g. Q = 0 runs).
StepMetrics compute_metrics(const ImuState& truth, const ImuState& estimate, const MatrixXd& cov,
                            Retraction retraction);

/// Per-timestep series. For a single run the rms columns hold the error norms;
/// after aggregation they hold root-mean-square values across runs.
struct RunMetrics {
  std::vector<double> t;
  std::vector<double> rms_ori;
  std::vector<double> rms_pos;
  std::vector<double> nees_ori;
  std::vector<double> nees_pose;

  void push(double time, const StepMetrics& m);
  std::size_t size() const { return t.size(); }
};

/// RMS of errors and mean NEES across runs, per timestep, summed in run order.
RunMetrics aggregate(const std::vector<const RunMetrics*>& runs);

/// Time average of a series, optionally skipping a leading fraction.
double time_average(const std::vector<double>& series, double skip_fraction = 0.0);

}  // namespace ivins
