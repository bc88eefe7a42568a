#include "ivins/metrics.hpp"

#include <cmath>
#include <limits>

#include "ivins/errors.hpp"

namespace ivins {

double nees(const VectorXd& e, const MatrixXd& P) {
  if (P.rows() != P.cols() || P.rows() != e.size()) {
    throw ContractError("nees: error and covariance sizes differ");
  }
  Eigen::LDLT<MatrixXd> ldlt(P);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 0.0) {
    throw ContractError("nees: covariance is not positive definite");
  }
  return e.dot(ldlt.solve(e));
}

StepMetrics compute_metrics(const ImuState& truth, const ImuState& estimate, const MatrixXd& cov,
                            Retraction retraction) {
  if (cov.rows() < kImuDim || cov.cols() < kImuDim) {
    throw ContractError("compute_metrics: covariance smaller than the IMU block");
  }
  const Eigen::Matrix<double, 15, 1> e = retraction == Retraction::kRightInvariant
                                             ? imu_inverse_retract(truth, estimate)
                                             : conventional_imu_inverse_retract(truth, estimate);
  StepMetrics m;
  m.err_ori = log_so3(truth.R.transpose() * estimate.R).norm();
  m.err_pos = (truth.p - estimate.p).norm();

  Eigen::Matrix<double, 6, 1> ep;
  ep << e.segment<3>(kTheta), e.segment<3>(kPos);
  Eigen::Matrix<double, 6, 6> Pp;
  Pp << cov.block<3, 3>(kTheta, kTheta), cov.block<3, 3>(kTheta, kPos),
      cov.block<3, 3>(kPos, kTheta), cov.block<3, 3>(kPos, kPos);
  try {
    m.nees_ori = nees(e.segment<3>(kTheta), Pp.topLeftCorner<3, 3>());
    m.nees_pose = nees(ep, Pp);
  } catch (const ContractError&) {
    m.nees_ori = m.nees_pose = std::numeric_limits<double>::quiet_NaN();
  }
  return m;
}

void RunMetrics::push(double time, const StepMetrics& m) {
  t.push_back(time);
  rms_ori.push_back(m.err_ori);
  rms_pos.push_back(m.err_pos);
  nees_ori.push_back(m.nees_ori);
  nees_pose.push_back(m.nees_pose);
}

RunMetrics aggregate(const std::vector<const RunMetrics*>& runs) {
  RunMetrics out;
  if (runs.empty()) return out;
  const std::size_t n = runs.front()->size();
  for (const RunMetrics* r : runs) {
    if (r->size() != n) throw ContractError("aggregate: runs have different lengths");
  }
  const double count = static_cast<double>(runs.size());
  for (std::size_t k = 0; k < n; ++k) {
    double so = 0.0, sp = 0.0, no = 0.0, np = 0.0;
    for (const RunMetrics* r : runs) {
      so += r->rms_ori[k] * r->rms_ori[k];
      sp += r->rms_pos[k] * r->rms_pos[k];
      no += r->nees_ori[k];
      np += r->nees_pose[k];
    }
    out.t.push_back(runs.front()->t[k]);
    out.rms_ori.push_back(std::sqrt(so / count));
    out.rms_pos.push_back(std::sqrt(sp / count));
    out.nees_ori.push_back(no / count);
    out.nees_pose.push_back(np / count);
  }
  return out;
}

double time_average(const std::vector<double>& series, double skip_fraction) {
  if (series.empty()) return 0.0;
  const auto skip = static_cast<std::size_t>(skip_fraction * static_cast<double>(series.size()));
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t k = std::min(skip, series.size() - 1); k < series.size(); ++k, ++n) {
    s += series[k];
  }
  return s / static_cast<double>(n);
}

}  // namespace ivins
