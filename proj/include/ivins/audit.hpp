#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ivins/msckf.hpp"
#include "ivins/state.hpp"
#include "ivins/vins_filters.hpp"

namespace ivins {

/// The analytic matrices under audit. Defaults are the library functions;
/// tests swap one out to check that a broken Jacobian is caught.
struct AnalyticJacobians {
  std::function<MatrixXd(Retraction, const VinsState&, const ImuSample&, const Gravity&)> F =
      error_F;
  std::function<MatrixXd(Retraction, const VinsState&)> G = error_G;
  std::function<MatrixXd(Retraction, const VinsState&, const CameraModel&, int)> H =
      measurement_H;
  std::function<MatrixXd(const MsckfState&, const CameraModel&, Retraction)> J = clone_jacobian;
};

struct AuditEntry {
  std::string name;
  double max_error = 0.0;  // max over samples of |A_fd - A| / |A_fd| (Frobenius)
};

inline constexpr double kDefaultAuditTolerance = 1e-5;

/// Random-state finite-difference audit of F, G, H, the clone Jacobian, the
/// transform Jacobians M (= W_D) and N on both state types, and the
/// sliding-window track Jacobians (anchor/clone blocks and H_f).
std::vector<AuditEntry> audit_jacobians(Retraction r, int samples, std::uint64_t seed,
                                        const AnalyticJacobians& analytic = {});

/// Relative Frobenius difference, absolute when the reference is ~0.
double relative_error(const MatrixXd& reference, const MatrixXd& value);

}  // namespace ivins
