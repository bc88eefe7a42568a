#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ivins/ekf.hpp"
#include "ivins/state.hpp"
#include "ivins/vins_filters.hpp"

namespace ivins {

struct FeatureObservation {
  double t = 0.0;  // timestamp of the clone that saw it
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();
};

struct FeatureTrack {
  int landmark_id = 0;
  std::vector<FeatureObservation> observations;
};

struct WindowConfig {
  int max_clones = 10;
  int min_track_len = 5;
  /// Per-track chi-square gate confidence (e.g. 0.95); disabled when empty.
  std::optional<double> chi2_confidence;
};

/// Index of the clone with timestamp t, or -1.
int clone_index(const MsckfState& x, double t);

/// P <- Diag(Phi, I) P Diag(Phi, I)^T + Diag(Qd, 0). The 15-dim Phi and Qd come
/// from the variant's IMU-block providers and are returned through `out`.
GaussianBelief<MsckfState> msckf_propagate(const GaussianBelief<MsckfState>& belief,
                                           std::span<const ImuSample> imu, Retraction variant,
                                           const Gravity& g, const ImuNoise& Q,
                                           PropagationResult* out = nullptr);

/// d(new clone error)/d(state error), 6 x n.
MatrixXd clone_jacobian(const MsckfState& x, const CameraModel& cam, Retraction variant);

/// Appends the current camera pose as a clone and grows the covariance with
/// [I; J] P [I; J]^T.
GaussianBelief<MsckfState> augment_clone(const GaussianBelief<MsckfState>& belief, double t,
                                         const CameraModel& cam, Retraction variant);

/// Drops the oldest clone (marginalisation of a Gaussian = sub-matrix).
GaussianBelief<MsckfState> prune_window(const GaussianBelief<MsckfState>& belief);

inline constexpr double kMinTriangulationBaseline = 0.02;  // m
inline constexpr int kMaxGaussNewtonIterations = 10;
inline constexpr double kGaussNewtonTolerance = 1e-8;  // m

/// Midpoint two-view initialisation from the first and last observations
/// followed by Gauss-Newton on the reprojection error. Empty on failure.
std::optional<Vec3> triangulate(const FeatureTrack& track, const MsckfState& x,
                                const CameraModel& cam);

/// Linearised measurement model of one track.
struct TrackSystem {
  MatrixXd Hx;  // 2M x n
  MatrixXd Hf;  // 2M x 3
  VectorXd r;   // z - h(x)
  int anchor = -1;
  int observations = 0;
};

/// Per-observation Jacobians. For the right-invariant variant the landmark error
/// is anchored at the earliest observing clone. Observations predicted behind
/// the camera are dropped; empty if the track has none left.
std::optional<TrackSystem> track_jacobians(const FeatureTrack& track, const MsckfState& x,
                                           const Vec3& f, Retraction variant,
                                           const CameraModel& cam);

struct ProjectedSystem {
  MatrixXd H;
  VectorXd r;
};

/// Left null-space projection of a track system via Householder QR of Hf.
/// Empty when 2M - 3 <= 0.
std::optional<ProjectedSystem> nullspace_project(const TrackSystem& sys);

struct UpdateStats {
  int tracks_used = 0;
  int tracks_rejected = 0;
  int rows = 0;
  bool accepted = false;
};

/// Triangulates, linearises and projects every track, stacks the result and
/// applies one EKF update (after QR compression when rows exceed the state).
GaussianBelief<MsckfState> nullspace_update(const GaussianBelief<MsckfState>& belief,
                                            std::span<const FeatureTrack> tracks,
                                            Retraction variant, const CameraModel& cam,
                                            double pixel_sigma, const WindowConfig& cfg,
                                            UpdateStats* stats = nullptr);

/// Sliding-window filter: MSCKF (conventional retraction) or RI-MSCKF.
class MsckfFilter {
 public:
  MsckfFilter(Retraction variant, CameraModel cam, Gravity gravity, NoiseConfig noise,
              WindowConfig window, GaussianBelief<MsckfState> initial);

  /// Propagates over `imu` (may be empty for the very first frame), then
  /// consumes tracks anchored at a clone about to leave the window, prunes,
  /// clones the pose at t, records the frame and consumes lost tracks.
  void process_frame(std::span<const ImuSample> imu, double t, std::span<const Measurement> frame);

  const GaussianBelief<MsckfState>& belief() const { return belief_; }
  const std::map<int, FeatureTrack>& tracks() const { return tracks_; }
  Retraction variant() const { return variant_; }
  const UpdateStats& last_stats() const { return stats_; }

  /// Replaces the belief (used by the twin experiments).
  void set_belief(GaussianBelief<MsckfState> b) { belief_ = std::move(b); }

 private:
  void consume(const std::vector<FeatureTrack>& tracks);

  Retraction variant_;
  CameraModel cam_;
  Gravity gravity_;
  NoiseConfig noise_;
  WindowConfig window_;
  GaussianBelief<MsckfState> belief_;
  std::map<int, FeatureTrack> tracks_;
  UpdateStats stats_;
};

}  // namespace ivins
