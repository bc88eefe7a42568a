#include "ivins/invariance.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "ivins/errors.hpp"
#include "ivins/msckf.hpp"

namespace ivins {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), which};
  return std::mt19937_64(seq);
}

VectorXd gaussian(std::mt19937_64& rng, const VectorXd& sigma) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd e(sigma.size());
  for (int i = 0; i < sigma.size(); ++i) e[i] = sigma[i] * normal(rng);
  return e;
}

VectorXd initial_sigmas(int landmarks) {
  VectorXd s(kImuDim + 3 * landmarks);
  s.segment<3>(kTheta).setConstant(0.05);
  s.segment<3>(kVel).setConstant(0.1);
  s.segment<3>(kPos).setConstant(0.3);
  s.segment<3>(kBg).setConstant(0.01);
  s.segment<3>(kBa).setConstant(0.05);
  s.tail(3 * landmarks).setConstant(0.3);
  return s;
}

UnobsTransform deterministic_part(const UnobsTransform& t) {
  return {t.yaw, t.translation, Eigen::Matrix4d::Zero()};
}

Eigen::Matrix4d sqrt_psd(const Eigen::Matrix4d& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(S);
  const Eigen::Vector4d d = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

VinsState random_state(std::mt19937_64& rng, int landmarks) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto vec = [&](double scale) -> Vec3 { return Vec3(uni(rng), uni(rng), uni(rng)) * scale; };
  VinsState x;
  x.imu.R = exp_so3(vec(2.0));
  x.imu.v = vec(3.0);
  x.imu.p = vec(5.0);
  x.imu.bg = vec(0.05);
  x.imu.ba = vec(0.2);
  for (int i = 0; i < landmarks; ++i) x.landmarks.push_back(vec(8.0));
  return x;
}

// Error vector with velocity, position and landmark blocks made dimensionless.
VectorXd scaled_error(const VectorXd& e) {
  VectorXd s = e;
  s.segment<6>(kVel) /= kSceneScale;
  s.tail(e.size() - kImuDim) /= kSceneScale;
  return s;
}

double measurement_divergence(const VinsState& x, const VinsState& y, const CameraModel& cam) {
  double sq = 0.0;
  for (int i = 0; i < static_cast<int>(x.landmarks.size()); ++i) {
    try {
      const Eigen::Vector2d d = predict_measurement(x, cam, i) - predict_measurement(y, cam, i);
      sq += d.squaredNorm();
    } catch (const BehindCameraError&) {
    }
  }
  return std::sqrt(sq) / cam.fx;
}

double chain_residual(const MatrixXd& H, const MatrixXd& chain, double n_norm) {
  if (H.rows() == 0 || n_norm == 0.0) return 0.0;
  const double h_norm = H.norm();
  if (h_norm == 0.0) return 0.0;
  return (H * chain).norm() / (h_norm * n_norm);
}

}  // namespace

LabScenario make_lab_scenario(int steps, std::uint64_t seed, int landmark_count) {
  if (steps < 1) throw ContractError("make_lab_scenario: steps must be >= 1");
  if (landmark_count < 1) throw ContractError("make_lab_scenario: need at least one landmark");
  LabScenario s;
  s.steps = steps;
  s.cfg.seed = seed;
  s.cfg.duration = std::max(2.0, steps / s.cfg.camera_rate);
  s.cfg.landmark_count = landmark_count;

  std::mt19937_64 lm_rng = stream(seed, 0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < landmark_count; ++i) {
    const double r = std::sqrt(uni(lm_rng));
    const double a = 2.0 * std::numbers::pi * uni(lm_rng);
    const double z = uni(lm_rng) - 0.5;
    s.landmarks.emplace_back(r * std::cos(a), r * std::sin(a), z);
  }

  const Trajectory truth(s.cfg);
  std::mt19937_64 imu_rng = stream(seed, 1);
  std::mt19937_64 cam_rng = stream(seed, 2);
  s.imu = synthesize_imu(truth, s.cfg, imu_rng);
  s.frames = synthesize_camera(truth, s.landmarks, s.cfg.camera, s.cfg, cam_rng);

  s.truth0.imu = true_state(truth, s.imu, 0);
  s.truth0.landmarks = s.landmarks;
  std::mt19937_64 init_rng = stream(seed, 3);
  const VectorXd sigma = initial_sigmas(landmark_count);
  s.initial.mean = conekf_retract(s.truth0, gaussian(init_rng, sigma));
  s.initial.cov = sigma.cwiseAbs2().asDiagonal();
  return s;
}

EquivarianceReport check_deterministic_equivariance(Retraction r, const UnobsTransform& t,
                                                    int samples, std::uint64_t seed) {
  if (samples < 1) throw ContractError("check_deterministic_equivariance: samples must be >= 1");
  const UnobsTransform td = deterministic_part(t);
  const Gravity g;
  std::mt19937_64 rng = stream(seed, 4);
  std::normal_distribution<double> normal(0.0, 0.1);
  EquivarianceReport rep;
  MatrixXd W0;
  for (int k = 0; k < samples; ++k) {
    const VinsState x = random_state(rng, 3);
    const MatrixXd W = transform_error_jacobians(x, td, r, g).M;
    const MatrixXd Wa = analytic_transform_jacobians(x, td, r, g).M;
    if (k == 0) W0 = W;
    rep.max_pairwise_deviation = std::max(rep.max_pairwise_deviation, (W - W0).cwiseAbs().maxCoeff());
    rep.max_closed_form_error = std::max(rep.max_closed_form_error, (W - Wa).cwiseAbs().maxCoeff());
    Eigen::JacobiSVD<MatrixXd> svd(W);
    const auto& sv = svd.singularValues();
    rep.condition = std::max(rep.condition, sv(0) / sv(sv.size() - 1));

    VectorXd e(x.error_dim());
    for (int i = 0; i < e.size(); ++i) e[i] = normal(rng);
    const VinsState lhs = apply_unobs_transform(retract(r, x, e), td, g);
    const VinsState rhs = retract(r, apply_unobs_transform(x, td, g), Wa * e);
    rep.max_residual = std::max(rep.max_residual, inverse_retract(r, lhs, rhs).norm() / e.norm());
  }
  return rep;
}

FilterTrace run_filter(Retraction r, const LabScenario& s,
                       const GaussianBelief<VinsState>& initial) {
  VinsFilter filter(r, s.cfg.camera, s.cfg.gravity, s.cfg.noise, initial);
  FilterTrace trace;
  trace.posteriors.push_back(initial);
  for (int n = 1; n <= s.steps; ++n) {
    trace.records.push_back(
        filter.step(imu_between_frames(s.imu, s.cfg, n), s.frames[n].measurements));
    trace.posteriors.push_back(filter.belief());
  }
  return trace;
}

MatrixXd effective_n(const VinsState& x, const UnobsTransform& t, Retraction r,
                     const Gravity& g) {
  return analytic_transform_jacobians(x, deterministic_part(t), r, g).N * sqrt_psd(t.sigma);
}

ChainReport check_chain_condition(Retraction r, const LabScenario& s, const UnobsTransform& t,
                                  int start, int horizon) {
  if (start < 0 || horizon < 1 || start + horizon > s.steps) {
    throw ContractError("check_chain_condition: horizon outside the scenario");
  }
  const FilterTrace trace = run_filter(r, s, s.initial);
  const MatrixXd N = effective_n(trace.posteriors[start].mean, t, r, s.cfg.gravity);
  const double n_norm = N.norm();
  MatrixXd chain = N;
  ChainReport rep;
  for (int j = start + 1; j <= start + horizon; ++j) {
    const StepRecord& rec = trace.records[j - 1];
    chain = rec.phi * chain;
    const double res = chain_residual(rec.H, chain, n_norm);
    rep.residuals.push_back(res);
    rep.max_residual = std::max(rep.max_residual, res);
  }
  return rep;
}

IdentityReport check_step_identities(Retraction r, const LabScenario& s, const UnobsTransform& t) {
  const UnobsTransform td = deterministic_part(t);
  const Gravity& g = s.cfg.gravity;
  const FilterTrace trace = run_filter(r, s, s.initial);
  IdentityReport rep;
  for (int n = 1; n <= s.steps; ++n) {
    const StepRecord& rec = trace.records[n - 1];
    const MatrixXd N0 = analytic_transform_jacobians(trace.posteriors[n - 1].mean, td, r, g).N;
    const MatrixXd N1 = analytic_transform_jacobians(rec.predicted.mean, td, r, g).N;
    rep.max_phi_residual = std::max(rep.max_phi_residual, (rec.phi * N0 - N1).norm());
    if (rec.H.rows() > 0) {
      rep.max_hn_residual = std::max(rep.max_hn_residual, (rec.H * N1).norm() / rec.H.norm());
    }
  }
  return rep;
}

std::string_view twin_mode_name(TwinMode m) {
  switch (m) {
    case TwinMode::kDeterministic:
      return "deterministic";
    case TwinMode::kStochasticIdentity:
      return "stochastic-identity";
    case TwinMode::kFull:
      return "full";
  }
  return "";
}

std::optional<TwinMode> parse_twin_mode(std::string_view name) {
  for (TwinMode m : {TwinMode::kDeterministic, TwinMode::kStochasticIdentity, TwinMode::kFull}) {
    if (name == twin_mode_name(m)) return m;
  }
  return std::nullopt;
}

TwinReport run_twin_experiment(Retraction r, const LabScenario& s, const UnobsTransform& t,
                               TwinMode mode) {
  const Gravity& g = s.cfg.gravity;
  UnobsTransform td = deterministic_part(t);
  if (mode == TwinMode::kStochasticIdentity) td = UnobsTransform{};
  Eigen::Matrix4d sigma = t.sigma;
  if (mode == TwinMode::kDeterministic) sigma.setZero();

  const GaussianBelief<VinsState>& x0 = s.initial;
  const TransformJacobians J = analytic_transform_jacobians(x0.mean, td, r, g);
  const MatrixXd& W = J.M;
  const MatrixXd Nsig = J.N * sqrt_psd(sigma);
  MatrixXd C = Nsig * Nsig.transpose();

  GaussianBelief<VinsState> y0;
  y0.mean = apply_unobs_transform(x0.mean, td, g);
  y0.cov = W * x0.cov * W.transpose() + C;
  symmetrize(y0.cov);

  const FilterTrace tx = run_filter(r, s, x0);
  const FilterTrace ty = run_filter(r, s, y0);
  const UnobsTransform back = inverse_transform(td, g);

  const double n_norm = Nsig.norm();
  MatrixXd chain = Nsig;
  TwinReport rep;
  for (int n = 1; n <= s.steps; ++n) {
    const StepRecord& rx = tx.records[n - 1];
    const StepRecord& ry = ty.records[n - 1];
    const GaussianBelief<VinsState>& px = tx.posteriors[n];
    const GaussianBelief<VinsState>& py = ty.posteriors[n];
    TwinStep st;
    st.step = n;

    chain = rx.phi * chain;
    st.residual = chain_residual(rx.H, chain, n_norm);

    const VinsState yb = apply_unobs_transform(py.mean, back, g);
    st.divergence_mean = scaled_error(inverse_retract(r, yb, px.mean)).norm();
    st.divergence_meas = measurement_divergence(px.mean, py.mean, s.cfg.camera);

    if (rx.updated || ry.updated) {
      if (rx.used_landmarks != ry.used_landmarks || rx.updated != ry.updated) {
        st.gain_deviation = std::numeric_limits<double>::infinity();
      } else {
        st.gain_deviation = (ry.K - W * rx.K).norm() / rx.K.norm();
      }
    }

    C = ry.phi * C * ry.phi.transpose();
    const MatrixXd WPW = W * px.cov * W.transpose();
    const double scale = C.norm() > 0.0 ? C.norm() : WPW.norm();
    st.cov_deviation = (py.cov - WPW - C).norm() / scale;

    rep.max_residual = std::max(rep.max_residual, st.residual);
    rep.max_divergence_mean = std::max(rep.max_divergence_mean, st.divergence_mean);
    rep.max_divergence_meas = std::max(rep.max_divergence_meas, st.divergence_meas);
    rep.max_gain_deviation = std::max(rep.max_gain_deviation, st.gain_deviation);
    rep.max_cov_deviation = std::max(rep.max_cov_deviation, st.cov_deviation);
    rep.steps.push_back(st);
  }
  return rep;
}

MsckfTwinReport run_msckf_twin(Retraction r, const UnobsTransform& t, TwinMode mode, int frames,
                               std::uint64_t seed) {
  if (frames < 2) throw ContractError("run_msckf_twin: need at least two frames");
  ScenarioConfig cfg;
  cfg.seed = seed;
  cfg.duration = frames / cfg.camera_rate;
  const Gravity& g = cfg.gravity;

  const Trajectory truth(cfg);
  std::mt19937_64 lm_rng = stream(seed, 0);
  const std::vector<Vec3> landmarks = generate_landmarks(cfg, lm_rng);
  std::mt19937_64 imu_rng = stream(seed, 1);
  std::mt19937_64 cam_rng = stream(seed, 2);
  const ImuStream imu = synthesize_imu(truth, cfg, imu_rng);
  const std::vector<Frame> stream_frames =
      synthesize_camera(truth, landmarks, cfg.camera, cfg, cam_rng);

  std::mt19937_64 init_rng = stream(seed, 3);
  Eigen::Matrix<double, 15, 1> sigma;
  sigma << Vec3::Constant(0.02), Vec3::Constant(0.05), Vec3::Constant(0.1), Vec3::Constant(0.005),
      Vec3::Constant(0.02);
  GaussianBelief<MsckfState> x0;
  x0.mean.imu = conventional_imu_retract(true_state(truth, imu, 0), gaussian(init_rng, sigma));
  x0.cov = sigma.cwiseAbs2().asDiagonal();

  UnobsTransform td = deterministic_part(t);
  if (mode == TwinMode::kStochasticIdentity) td = UnobsTransform{};
  Eigen::Matrix4d sig = t.sigma;
  if (mode == TwinMode::kDeterministic) sig.setZero();
  const TransformJacobians J = analytic_transform_jacobians(x0.mean, td, r, g);
  const MatrixXd Nsig = J.N * sqrt_psd(sig);
  GaussianBelief<MsckfState> y0;
  y0.mean = apply_unobs_transform(x0.mean, td, g);
  y0.cov = J.M * x0.cov * J.M.transpose() + Nsig * Nsig.transpose();
  symmetrize(y0.cov);

  MsckfFilter fx(r, cfg.camera, g, cfg.noise, cfg.window, x0);
  MsckfFilter fy(r, cfg.camera, g, cfg.noise, cfg.window, y0);
  const UnobsTransform back = inverse_transform(td, g);
  MsckfTwinReport rep;
  for (int k = 0; k < static_cast<int>(stream_frames.size()); ++k) {
    const auto span = imu_between_frames(imu, cfg, k);
    fx.process_frame(span, stream_frames[k].t, stream_frames[k].measurements);
    fy.process_frame(span, stream_frames[k].t, stream_frames[k].measurements);
    if (fx.last_stats().accepted) ++rep.updates;
    const MsckfState& mx = fx.belief().mean;
    const MsckfState yb = apply_unobs_transform(fy.belief().mean, back, g);
    double d = std::numeric_limits<double>::infinity();
    if (yb.clones.size() == mx.clones.size()) d = scaled_error(inverse_retract(r, yb, mx)).norm();
    rep.divergence.push_back(d);
    rep.max_divergence = std::max(rep.max_divergence, d);
  }
  return rep;
}

}  // namespace ivins
