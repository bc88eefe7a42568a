#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ivins/sim.hpp"
#include "ivins/state.hpp"
#include "ivins/vins_filters.hpp"

namespace ivins {

/// Scale used to make length-valued divergences dimensionless (landmark
/// cylinder radius).
inline constexpr double kSceneScale = 6.5;

/// Small landmark-in-state VINS problem on the circular trajectory: a handful
/// of landmarks near the circle axis (always in view), noisy sensors and a
/// perturbed initial estimate so updates move the mean.
struct LabScenario {
  ScenarioConfig cfg;
  std::vector<Vec3> landmarks;
  ImuStream imu;
  std::vector<Frame> frames;  // frames[0] is at t = 0 and is not used for updates
  VinsState truth0;
  GaussianBelief<VinsState> initial;
  int steps = 0;
};

/// Duration is max(2 s, steps / camera_rate).
LabScenario make_lab_scenario(int steps, std::uint64_t seed, int landmark_count = 8);

struct EquivarianceReport {
  double max_pairwise_deviation = 0.0;  // max |W(x_i) - W(x_0)| over sampled states
  double max_residual = 0.0;            // max |T_D(x ⊕ e) ⊖ (T_D(x) ⊕ W e)| / |e|
  double max_closed_form_error = 0.0;   // max |W_fd - W_analytic|
  double condition = 0.0;               // worst condition number of W
};

/// Numerical Jacobian W of the deterministic transform at random states.
EquivarianceReport check_deterministic_equivariance(Retraction r, const UnobsTransform& t,
                                                    int samples, std::uint64_t seed);

struct FilterTrace {
  std::vector<StepRecord> records;                    // records[n - 1] describes step n
  std::vector<GaussianBelief<VinsState>> posteriors;  // posteriors[0] is the initial belief
};

/// Runs the filter over the scenario's steps and records every cycle.
FilterTrace run_filter(Retraction r, const LabScenario& s,
                       const GaussianBelief<VinsState>& initial);

/// N of the perturbation scaled by Sigma^(1/2).
MatrixXd effective_n(const VinsState& x, const UnobsTransform& t, Retraction r, const Gravity& g);

struct ChainReport {
  std::vector<double> residuals;  // one per step of the horizon
  double max_residual = 0.0;
};

/// max_j |H_{j+1} Phi_j ... Phi_i N_i| / (|H_{j+1}| |N_i|) over the horizon,
/// with N_i taken at the posterior of step i (0 means the initial belief) and
/// the transform's Sigma. Steps without measurements are skipped.
ChainReport check_chain_condition(Retraction r, const LabScenario& s, const UnobsTransform& t,
                                  int start, int horizon);

struct IdentityReport {
  double max_phi_residual = 0.0;  // max |Phi_i N_i - N_{i+1}|
  double max_hn_residual = 0.0;   // max |H_{i+1} N_{i+1}| / |H_{i+1}|
};

/// Per-step propagation and measurement identities of the analytic N.
IdentityReport check_step_identities(Retraction r, const LabScenario& s, const UnobsTransform& t);

enum class TwinMode { kDeterministic, kStochasticIdentity, kFull };

std::string_view twin_mode_name(TwinMode m);
std::optional<TwinMode> parse_twin_mode(std::string_view name);

struct TwinStep {
  int step = 0;
  double residual = 0.0;         // chain residual up to this step
  double divergence_mean = 0.0;  // |T_D^-1(y_n) ⊖ x_n|, lengths over kSceneScale
  double divergence_meas = 0.0;  // |h(x_n) - h(y_n)| / fx over all landmarks
  double gain_deviation = 0.0;   // |K_y - W K| / |K|
  double cov_deviation = 0.0;    // |P_y - W P W^T - C_n| / max(|C_n|, |W P W^T|)
};

struct TwinReport {
  std::vector<TwinStep> steps;
  double max_divergence_mean = 0.0;
  double max_divergence_meas = 0.0;
  double max_gain_deviation = 0.0;
  double max_cov_deviation = 0.0;
  double max_residual = 0.0;

  double max_divergence() const { return std::max(max_divergence_mean, max_divergence_meas); }
};

/// Runs the filter from the scenario's initial belief and from its transformed
/// twin on identical inputs. The twin starts at T_D(x), W P W^T (deterministic),
/// x, P + N Sigma N^T (stochastic identity) or T_D(x), W P W^T + N Sigma N^T (full).
TwinReport run_twin_experiment(Retraction r, const LabScenario& s, const UnobsTransform& t,
                               TwinMode mode);

struct MsckfTwinReport {
  std::vector<double> divergence;  // per frame, same scaling as TwinStep::divergence_mean
  double max_divergence = 0.0;
  int updates = 0;  // accepted updates of the untransformed run
};

/// Sliding-window version of the twin experiment on the Monte Carlo scenario,
/// started from a perturbed estimate and run for `frames` camera frames.
MsckfTwinReport run_msckf_twin(Retraction r, const UnobsTransform& t, TwinMode mode, int frames,
                               std::uint64_t seed);

}  // namespace ivins
