#include "ivins/audit.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "ivins/errors.hpp"

namespace ivins {

namespace {

constexpr double kStep = 1e-6;      // central differences of smooth maps
constexpr double kTimeStep = 1e-4;  // time derivative of the error
constexpr double kNestedStep = 1e-4;

using Eigen::Vector2d;
using Vec12 = Eigen::Matrix<double, 12, 1>;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  Vec3 vec(double scale) { return Vec3(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1)) * scale; }
  Mat3 rotation() { return exp_so3(vec(2.5)); }

  ImuState imu() {
    ImuState x;
    x.R = rotation();
    x.v = vec(3.0);
    x.p = vec(5.0);
    x.bg = vec(0.05);
    x.ba = vec(0.2);
    return x;
  }

  ImuSample input() { return {0.0, vec(1.0), vec(10.0)}; }

  // Camera-frame point well inside the image.
  Vec3 camera_point() {
    const double z = uniform(2.0, 8.0);
    return Vec3(uniform(-0.5, 0.5) * z, uniform(-0.4, 0.4) * z, z);
  }

 private:
  std::mt19937_64 rng_;
};

// Noise-driven derivative: w_m = w + bg + n_g, a_m = a + ba + n_a, b' = n_b.
ImuState noisy_derivative(const ImuState& x, const ImuSample& u, const Vec12& n,
                          const Gravity& g) {
  ImuSample v = u;
  v.omega -= n.segment<3>(0);
  v.accel -= n.segment<3>(6);
  ImuState d = imu_derivative(x, v, g);
  d.bg = n.segment<3>(3);
  d.ba = n.segment<3>(9);
  return d;
}

ImuState axpy(const ImuState& x, double h, const ImuState& d) {
  ImuState y;
  y.R = x.R + h * d.R;
  y.v = x.v + h * d.v;
  y.p = x.p + h * d.p;
  y.bg = x.bg + h * d.bg;
  y.ba = x.ba + h * d.ba;
  return y;
}

// One RK4 step of length h (may be negative) with a constant input.
ImuState flow(const ImuState& x, const ImuSample& u, const Vec12& n, const Gravity& g, double h) {
  const ImuState k1 = noisy_derivative(x, u, n, g);
  const ImuState k2 = noisy_derivative(axpy(x, 0.5 * h, k1), u, n, g);
  const ImuState k3 = noisy_derivative(axpy(x, 0.5 * h, k2), u, n, g);
  const ImuState k4 = noisy_derivative(axpy(x, h, k3), u, n, g);
  ImuState y = x;
  y.R = x.R + (h / 6.0) * (k1.R + 2.0 * k2.R + 2.0 * k3.R + k4.R);
  y.v = x.v + (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  y.p = x.p + (h / 6.0) * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  y.bg = x.bg + (h / 6.0) * (k1.bg + 2.0 * k2.bg + 2.0 * k3.bg + k4.bg);
  y.ba = x.ba + (h / 6.0) * (k1.ba + 2.0 * k2.ba + 2.0 * k3.ba + k4.ba);
  return y;
}

// d/dt of (x̂ ⊕ e) ⊖ x̂ when the true state is driven by noise n and the
// estimate by the noise-free mean dynamics.
VectorXd error_rate(Retraction r, const VinsState& xhat, const ImuSample& u, const Gravity& g,
                    const VectorXd& e, const Vec12& n) {
  const VinsState x = retract(r, xhat, e);
  VectorXd out = VectorXd::Zero(e.size());
  for (double sgn : {1.0, -1.0}) {
    const double h = sgn * kTimeStep;
    VinsState xt = x;
    VinsState xh = xhat;
    xt.imu = flow(x.imu, u, n, g, h);
    xh.imu = flow(xhat.imu, u, Vec12::Zero(), g, h);
    out += sgn * inverse_retract(r, xt, xh);
  }
  return out / (2.0 * kTimeStep);
}

template <class Fn>
MatrixXd numeric_jacobian(const Fn& fn, int dim, double step) {
  MatrixXd J;
  for (int j = 0; j < dim; ++j) {
    VectorXd d = VectorXd::Zero(dim);
    d[j] = step;
    const VectorXd col = (fn(d) - fn(-d)) / (2.0 * step);
    if (j == 0) J.resize(col.size(), dim);
    J.col(j) = col;
  }
  return J;
}

Pose imu_pose(const ImuState& x) { return {x.R, x.p}; }

// VINS state whose landmarks are all in front of the camera.
VinsState vins_sample(Sampler& s, const CameraModel& cam, int landmarks) {
  VinsState x;
  x.imu = s.imu();
  const Pose T_WC = pose_compose(imu_pose(x.imu), cam.T_IC());
  for (int i = 0; i < landmarks; ++i) {
    x.landmarks.push_back(pose_transform_point(T_WC, s.camera_point()));
  }
  return x;
}

// Sliding-window state whose clones all see the landmark f.
MsckfState window_sample(Sampler& s, const Vec3& f, int clones) {
  MsckfState x;
  x.imu = s.imu();
  for (int k = 0; k < clones; ++k) {
    Pose c;
    c.rotation = s.rotation();
    c.translation = f - c.rotation * s.camera_point();
    x.clones.push_back({0.1 * k, c});
  }
  return x;
}

CameraModel audit_camera() {
  CameraModel cam;
  cam.T_CI.rotation = exp_so3(Vec3(0.3, -1.2, 0.4));
  cam.T_CI.translation = Vec3(0.05, -0.03, 0.1);
  cam.check_fov = false;
  return cam;
}

void record(std::vector<AuditEntry>& out, const std::string& name, double err) {
  for (AuditEntry& e : out) {
    if (e.name == name) {
      e.max_error = std::max(e.max_error, err);
      return;
    }
  }
  out.push_back({name, err});
}

}  // namespace

double relative_error(const MatrixXd& reference, const MatrixXd& value) {
  if (reference.rows() != value.rows() || reference.cols() != value.cols()) {
    return std::numeric_limits<double>::infinity();
  }
  const double scale = reference.norm();
  const double diff = (reference - value).norm();
  return scale > 1e-12 ? diff / scale : diff;
}

std::vector<AuditEntry> audit_jacobians(Retraction r, int samples, std::uint64_t seed,
                                        const AnalyticJacobians& analytic) {
  if (samples < 1) throw ContractError("audit_jacobians: samples must be >= 1");
  Sampler s(seed);
  const Gravity g;
  const CameraModel cam = audit_camera();
  std::vector<AuditEntry> out;

  for (int k = 0; k < samples; ++k) {
    const VinsState x = vins_sample(s, cam, 2);
    const ImuSample u = s.input();
    const int n = x.error_dim();

    const MatrixXd F_fd = numeric_jacobian(
        [&](const VectorXd& e) { return error_rate(r, x, u, g, e, Vec12::Zero()); }, n,
        kNestedStep);
    record(out, "F", relative_error(F_fd, analytic.F(r, x, u, g)));

    const MatrixXd G_fd = numeric_jacobian(
        [&](const VectorXd& w) { return error_rate(r, x, u, g, VectorXd::Zero(n), w); }, 12,
        kNestedStep);
    record(out, "G", relative_error(G_fd, analytic.G(r, x)));

    for (int i = 0; i < static_cast<int>(x.landmarks.size()); ++i) {
      const MatrixXd H_fd = numeric_jacobian(
          [&](const VectorXd& e) -> VectorXd {
            return predict_measurement(retract(r, x, e), cam, i);
          },
          n, kStep);
      record(out, "H", relative_error(H_fd, analytic.H(r, x, cam, i)));
    }

    UnobsTransform t;
    t.yaw = s.uniform(-3.0, 3.0);
    t.translation = s.vec(5.0);
    const TransformJacobians Jn = transform_error_jacobians(x, t, r, g);
    const TransformJacobians Ja = analytic_transform_jacobians(x, t, r, g);
    record(out, "M (W_D)", relative_error(Jn.M, Ja.M));
    record(out, "N", relative_error(Jn.N, Ja.N));

    const Vec3 f = s.vec(4.0);
    const MsckfState w = window_sample(s, f, 4);
    const int nw = w.error_dim();
    const TransformJacobians Wn = transform_error_jacobians(w, t, r, g);
    const TransformJacobians Wa = analytic_transform_jacobians(w, t, r, g);
    record(out, "M (W_D) window", relative_error(Wn.M, Wa.M));
    record(out, "N window", relative_error(Wn.N, Wa.N));

    const Pose c0 = pose_compose(imu_pose(w.imu), cam.T_IC());
    const MatrixXd J_fd = numeric_jacobian(
        [&](const VectorXd& e) -> VectorXd {
          const Pose c = pose_compose(imu_pose(retract(r, w, e).imu), cam.T_IC());
          return r == Retraction::kRightInvariant ? pose_inverse_retract(c, c0)
                                                  : conventional_pose_inverse_retract(c, c0);
        },
        nw, kStep);
    record(out, "J (clone)", relative_error(J_fd, analytic.J(w, cam, r)));

    FeatureTrack track;
    for (const Clone& c : w.clones) track.observations.push_back({c.t, Vector2d::Zero()});
    const auto sys = track_jacobians(track, w, f, r, cam);
    if (!sys) {
      record(out, "A/B (track)", std::numeric_limits<double>::infinity());
      continue;
    }
    const int anchor = kImuDim + kCloneDim * sys->anchor;
    auto predict = [&](const VectorXd& e) -> VectorXd {
      const MsckfState y = retract(r, w, e.head(nw));
      Vec3 fy = f + e.tail<3>();
      if (r == Retraction::kRightInvariant) {
        Eigen::Matrix<double, 9, 1> ea;
        ea << e.segment<6>(anchor), e.tail<3>();
        fy = anchored_landmark_retract(w.clones[sys->anchor].pose, f, ea).second;
      }
      VectorXd z(2 * y.clones.size());
      for (std::size_t c = 0; c < y.clones.size(); ++c) {
        const Pose& p = y.clones[c].pose;
        z.segment<2>(2 * c) =
            project_camera_point(cam, p.rotation.transpose() * (fy - p.translation));
      }
      return z;
    };
    const MatrixXd T_fd = numeric_jacobian(predict, nw + 3, kStep);
    record(out, "A/B (track)", relative_error(T_fd.leftCols(nw), sys->Hx));
    record(out, "H_f (track)", relative_error(T_fd.rightCols(3), sys->Hf));
  }
  return out;
}

}  // namespace ivins
