#include "ivins/msckf.hpp"

#include <algorithm>

#include <boost/math/distributions/chi_squared.hpp>

#include "ivins/errors.hpp"

namespace ivins {

int clone_index(const MsckfState& x, double t) {
  for (std::size_t i = 0; i < x.clones.size(); ++i) {
    if (x.clones[i].t == t) return static_cast<int>(i);
  }
  return -1;
}

GaussianBelief<MsckfState> msckf_propagate(const GaussianBelief<MsckfState>& belief,
                                           std::span<const ImuSample> imu, Retraction variant,
                                           const Gravity& g, const ImuNoise& Q,
                                           PropagationResult* out) {
  PropagationResult prop = propagate_imu_block(variant, belief.mean.imu, imu, g, Q);
  GaussianBelief<MsckfState> next = belief;
  next.mean.imu = prop.trajectory.final_state();
  MatrixXd& P = next.cov;
  const Eigen::Index n = P.rows();
  const Eigen::Index c = n - kImuDim;
  P.topLeftCorner(kImuDim, kImuDim) =
      prop.phi * belief.cov.topLeftCorner(kImuDim, kImuDim) * prop.phi.transpose() + prop.qd;
  if (c > 0) {
    P.topRightCorner(kImuDim, c) = prop.phi * belief.cov.topRightCorner(kImuDim, c);
    P.bottomLeftCorner(c, kImuDim) = P.topRightCorner(kImuDim, c).transpose();
  }
  symmetrize(P);
  if (out) *out = std::move(prop);
  return next;
}

MatrixXd clone_jacobian(const MsckfState& x, const CameraModel& cam, Retraction variant) {
  MatrixXd J = MatrixXd::Zero(kCloneDim, x.error_dim());
  if (variant == Retraction::kRightInvariant) {
    J.block<3, 3>(0, kTheta) = Mat3::Identity();
    J.block<3, 3>(3, kPos) = Mat3::Identity();
  } else {
    const Pose T_IC = cam.T_IC();
    J.block<3, 3>(0, kTheta) = T_IC.rotation.transpose();
    J.block<3, 3>(3, kTheta) = -x.imu.R * skew(T_IC.translation);
    J.block<3, 3>(3, kPos) = Mat3::Identity();
  }
  return J;
}

GaussianBelief<MsckfState> augment_clone(const GaussianBelief<MsckfState>& belief, double t,
                                         const CameraModel& cam, Retraction variant) {
  const MsckfState& x = belief.mean;
  if (!x.clones.empty() && !(t > x.clones.back().t)) {
    throw ContractError("augment_clone: clone timestamps must increase");
  }
  const Pose T_IC = cam.T_IC();
  GaussianBelief<MsckfState> out;
  out.mean = x;
  out.mean.clones.push_back(
      {t, {x.imu.R * T_IC.rotation, x.imu.R * T_IC.translation + x.imu.p}});

  const MatrixXd J = clone_jacobian(x, cam, variant);
  const Eigen::Index n = belief.cov.rows();
  const MatrixXd JP = J * belief.cov;
  out.cov.resize(n + kCloneDim, n + kCloneDim);
  out.cov.topLeftCorner(n, n) = belief.cov;
  out.cov.bottomLeftCorner(kCloneDim, n) = JP;
  out.cov.topRightCorner(n, kCloneDim) = JP.transpose();
  out.cov.bottomRightCorner(kCloneDim, kCloneDim) = JP * J.transpose();
  symmetrize(out.cov);
  return out;
}

GaussianBelief<MsckfState> prune_window(const GaussianBelief<MsckfState>& belief) {
  if (belief.mean.clones.empty()) throw ContractError("prune_window: no clones to drop");
  GaussianBelief<MsckfState> out;
  out.mean = belief.mean;
  out.mean.clones.erase(out.mean.clones.begin());
  const Eigen::Index n = belief.cov.rows();
  const Eigen::Index tail = n - kImuDim - kCloneDim;
  out.cov.resize(n - kCloneDim, n - kCloneDim);
  out.cov.topLeftCorner(kImuDim, kImuDim) = belief.cov.topLeftCorner(kImuDim, kImuDim);
  out.cov.topRightCorner(kImuDim, tail) = belief.cov.topRightCorner(kImuDim, tail);
  out.cov.bottomLeftCorner(tail, kImuDim) = belief.cov.bottomLeftCorner(tail, kImuDim);
  out.cov.bottomRightCorner(tail, tail) = belief.cov.bottomRightCorner(tail, tail);
  return out;
}

// ---- triangulation -------------------------------------------------------------

namespace {

Vec3 bearing(const CameraModel& cam, const Eigen::Vector2d& uv) {
  return {(uv.x() - cam.cx) / cam.fx, (uv.y() - cam.cy) / cam.fy, 1.0};
}

struct ObservedPose {
  const Pose* pose;
  Eigen::Vector2d uv;
};

std::vector<ObservedPose> gather(const FeatureTrack& track, const MsckfState& x) {
  std::vector<ObservedPose> out;
  for (const FeatureObservation& o : track.observations) {
    const int idx = clone_index(x, o.t);
    if (idx >= 0) out.push_back({&x.clones[idx].pose, o.uv});
  }
  return out;
}

}  // namespace

std::optional<Vec3> triangulate(const FeatureTrack& track, const MsckfState& x,
                                const CameraModel& cam) {
  const std::vector<ObservedPose> obs = gather(track, x);
  if (obs.size() < 2) return std::nullopt;

  const Pose& c1 = *obs.front().pose;
  const Pose& c2 = *obs.back().pose;
  const Vec3 baseline = c2.translation - c1.translation;
  if (baseline.norm() < kMinTriangulationBaseline) return std::nullopt;

  const Vec3 d1 = (c1.rotation * bearing(cam, obs.front().uv)).normalized();
  const Vec3 d2 = (c2.rotation * bearing(cam, obs.back().uv)).normalized();
  // Nearly parallel rays: depth is unconstrained.
  if (d1.cross(d2).norm() < 1e-3) return std::nullopt;

  Eigen::Matrix2d A;
  A << d1.dot(d1), -d1.dot(d2), d1.dot(d2), -d2.dot(d2);
  const Eigen::Vector2d st = A.partialPivLu().solve(Eigen::Vector2d(d1.dot(baseline), d2.dot(baseline)));
  if (st(0) <= 0.0 || st(1) <= 0.0) return std::nullopt;
  Vec3 f = 0.5 * ((c1.translation + st(0) * d1) + (c2.translation + st(1) * d2));

  for (int it = 0; it < kMaxGaussNewtonIterations; ++it) {
    Mat3 normal = Mat3::Zero();
    Vec3 rhs = Vec3::Zero();
    for (const ObservedPose& o : obs) {
      const Mat3 Rt = o.pose->rotation.transpose();
      const Vec3 xc = Rt * (f - o.pose->translation);
      if (xc.z() <= kMinDepth) return std::nullopt;
      const Eigen::Vector2d r = o.uv - project_camera_point(cam, xc);
      const Eigen::Matrix<double, 2, 3> J = projection_jacobian(cam, xc) * Rt;
      normal += J.transpose() * J;
      rhs += J.transpose() * r;
    }
    const Eigen::LDLT<Mat3> ldlt(normal);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) return std::nullopt;
    const Vec3 step = ldlt.solve(rhs);
    f += step;
    if (step.norm() < kGaussNewtonTolerance) {
      for (const ObservedPose& o : obs) {
        if ((o.pose->rotation.transpose() * (f - o.pose->translation)).z() <= kMinDepth) {
          return std::nullopt;
        }
      }
      return f;
    }
  }
  return std::nullopt;
}

// ---- measurement model -------------------------------------------------------------

std::optional<TrackSystem> track_jacobians(const FeatureTrack& track, const MsckfState& x,
                                           const Vec3& f, Retraction variant,
                                           const CameraModel& cam) {
  TrackSystem sys;
  const int n = x.error_dim();
  // Anchor: earliest clone in the window observing the landmark.
  for (const FeatureObservation& o : track.observations) {
    const int idx = clone_index(x, o.t);
    if (idx >= 0 && (sys.anchor < 0 || idx < sys.anchor)) sys.anchor = idx;
  }
  if (sys.anchor < 0) return std::nullopt;

  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> hx_rows;
  std::vector<Eigen::Matrix<double, 2, 3>> hf_rows;
  std::vector<Eigen::Vector2d> res;
  for (const FeatureObservation& o : track.observations) {
    const int k = clone_index(x, o.t);
    if (k < 0) continue;
    const Pose& c = x.clones[k].pose;
    const Mat3 Rt = c.rotation.transpose();
    const Vec3 xc = Rt * (f - c.translation);
    if (xc.z() <= kMinDepth) continue;
    const Eigen::Matrix<double, 2, 3> dpi = projection_jacobian(cam, xc);
    Eigen::Matrix<double, 2, Eigen::Dynamic> hx = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, n);
    const int ck = kImuDim + kCloneDim * k;
    if (variant == Retraction::kRightInvariant) {
      const int cj = kImuDim + kCloneDim * sys.anchor;
      const Eigen::Matrix<double, 2, 3> dRtSf = dpi * Rt * skew(f);
      hx.block<2, 3>(0, cj) += -dRtSf;  // A
      hx.block<2, 3>(0, ck) += dRtSf;   // B, rotation part
      hx.block<2, 3>(0, ck + 3) += -dpi * Rt;
    } else {
      hx.block<2, 3>(0, ck) = dpi * skew(xc);
      hx.block<2, 3>(0, ck + 3) = -dpi * Rt;
    }
    hx_rows.push_back(std::move(hx));
    hf_rows.push_back(dpi * Rt);
    res.push_back(o.uv - project_camera_point(cam, xc));
  }
  if (res.empty()) return std::nullopt;
  const int m = static_cast<int>(res.size());
  sys.observations = m;
  sys.Hx.resize(2 * m, n);
  sys.Hf.resize(2 * m, 3);
  sys.r.resize(2 * m);
  for (int i = 0; i < m; ++i) {
    sys.Hx.middleRows(2 * i, 2) = hx_rows[i];
    sys.Hf.middleRows(2 * i, 2) = hf_rows[i];
    sys.r.segment<2>(2 * i) = res[i];
  }
  return sys;
}

std::optional<ProjectedSystem> nullspace_project(const TrackSystem& sys) {
  const Eigen::Index rows = sys.Hf.rows();
  if (rows - 3 <= 0) return std::nullopt;
  const Eigen::HouseholderQR<MatrixXd> qr(sys.Hf);
  MatrixXd stacked(rows, sys.Hx.cols() + 1);
  stacked << sys.Hx, sys.r;
  stacked.applyOnTheLeft(qr.householderQ().transpose());
  ProjectedSystem out;
  out.H = stacked.bottomLeftCorner(rows - 3, sys.Hx.cols());
  out.r = stacked.bottomRightCorner(rows - 3, 1);
  return out;
}

GaussianBelief<MsckfState> nullspace_update(const GaussianBelief<MsckfState>& belief,
                                            std::span<const FeatureTrack> tracks,
                                            Retraction variant, const CameraModel& cam,
                                            double pixel_sigma, const WindowConfig& cfg,
                                            UpdateStats* stats) {
  UpdateStats local;
  const double var = pixel_sigma * pixel_sigma;
  const int n = belief.mean.error_dim();
  std::vector<ProjectedSystem> blocks;
  int total = 0;
  for (const FeatureTrack& track : tracks) {
    const std::optional<Vec3> f = triangulate(track, belief.mean, cam);
    if (!f) {
      ++local.tracks_rejected;
      continue;
    }
    const std::optional<TrackSystem> sys = track_jacobians(track, belief.mean, *f, variant, cam);
    if (!sys) {
      ++local.tracks_rejected;
      continue;
    }
    std::optional<ProjectedSystem> proj = nullspace_project(*sys);
    if (!proj) {
      ++local.tracks_rejected;
      continue;
    }
    if (cfg.chi2_confidence) {
      const Eigen::Index dof = proj->r.size();
      MatrixXd S = proj->H * belief.cov * proj->H.transpose();
      S.diagonal().array() += var;
      const double gamma = proj->r.dot(S.ldlt().solve(proj->r));
      const boost::math::chi_squared dist(static_cast<double>(dof));
      if (gamma > boost::math::quantile(dist, *cfg.chi2_confidence)) {
        ++local.tracks_rejected;
        continue;
      }
    }
    total += static_cast<int>(proj->r.size());
    blocks.push_back(std::move(*proj));
    ++local.tracks_used;
  }
  GaussianBelief<MsckfState> out = belief;
  if (total > 0) {
    MatrixXd H(total, n);
    VectorXd r(total);
    int row = 0;
    for (const ProjectedSystem& b : blocks) {
      H.middleRows(row, b.r.size()) = b.H;
      r.segment(row, b.r.size()) = b.r;
      row += static_cast<int>(b.r.size());
    }
    if (total > n) {
      // Measurement compression; the noise stays var * I under orthonormal Q.
      const Eigen::HouseholderQR<MatrixXd> qr(H);
      MatrixXd stacked(total, n + 1);
      stacked << H, r;
      stacked.applyOnTheLeft(qr.householderQ().transpose());
      H = stacked.topLeftCorner(n, n).triangularView<Eigen::Upper>();
      r = stacked.topRightCorner(n, 1);
    }
    local.rows = static_cast<int>(r.size());
    const MatrixXd V = var * MatrixXd::Identity(r.size(), r.size());
    auto res = ekf_update(belief, H, r, V, variant);
    local.accepted = res.accepted;
    out = std::move(res.belief);
  }
  if (stats) *stats = local;
  return out;
}

// ---- MsckfFilter ---------------------------------------------------------------------

MsckfFilter::MsckfFilter(Retraction variant, CameraModel cam, Gravity gravity, NoiseConfig noise,
                         WindowConfig window, GaussianBelief<MsckfState> initial)
    : variant_(variant),
      cam_(std::move(cam)),
      gravity_(std::move(gravity)),
      noise_(std::move(noise)),
      window_(window),
      belief_(std::move(initial)) {
  if (window_.max_clones < 2) throw ContractError("WindowConfig: max_clones must be >= 2");
  if (window_.min_track_len < 2) throw ContractError("WindowConfig: min_track_len must be >= 2");
  if (belief_.cov.rows() != belief_.mean.error_dim()) {
    throw ContractError("MsckfFilter: covariance does not match the state dimension");
  }
}

void MsckfFilter::consume(const std::vector<FeatureTrack>& tracks) {
  if (tracks.empty()) return;
  UpdateStats s;
  belief_ = nullspace_update(belief_, tracks, variant_, cam_, noise_.pixel_sigma, window_, &s);
  stats_.tracks_used += s.tracks_used;
  stats_.tracks_rejected += s.tracks_rejected;
  stats_.rows += s.rows;
  stats_.accepted = stats_.accepted || s.accepted;
}

void MsckfFilter::process_frame(std::span<const ImuSample> imu, double t,
                                std::span<const Measurement> frame) {
  stats_ = {};
  if (!imu.empty()) {
    belief_ = msckf_propagate(belief_, imu, variant_, gravity_, noise_.Q);
  }

  if (static_cast<int>(belief_.mean.clones.size()) >= window_.max_clones) {
    const double oldest = belief_.mean.clones.front().t;
    std::vector<FeatureTrack> anchored;
    for (auto it = tracks_.begin(); it != tracks_.end();) {
      auto& obs = it->second.observations;
      if (!obs.empty() && obs.front().t == oldest &&
          static_cast<int>(obs.size()) >= window_.min_track_len) {
        anchored.push_back(std::move(it->second));
        it = tracks_.erase(it);
        continue;
      }
      std::erase_if(obs, [&](const FeatureObservation& o) { return o.t == oldest; });
      it = obs.empty() ? tracks_.erase(it) : std::next(it);
    }
    consume(anchored);
    belief_ = prune_window(belief_);
  }

  belief_ = augment_clone(belief_, t, cam_, variant_);
  for (const Measurement& m : frame) {
    FeatureTrack& tr = tracks_[m.landmark_id];
    tr.landmark_id = m.landmark_id;
    tr.observations.push_back({t, m.uv});
  }

  std::vector<FeatureTrack> lost;
  for (auto it = tracks_.begin(); it != tracks_.end();) {
    if (it->second.observations.back().t != t) {
      if (static_cast<int>(it->second.observations.size()) >= window_.min_track_len) {
        lost.push_back(std::move(it->second));
      }
      it = tracks_.erase(it);
    } else {
      ++it;
    }
  }
  consume(lost);
}

}  // namespace ivins
