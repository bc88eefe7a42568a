#include <gtest/gtest.h>

#include "ivins/invariance.hpp"

using namespace ivins;

namespace {

constexpr Retraction kRi = Retraction::kRightInvariant;
constexpr Retraction kCon = Retraction::kConventional;

UnobsTransform deterministic() {
  UnobsTransform t;
  t.yaw = 0.5;
  t.translation = Vec3(1.0, -2.0, 0.5);
  return t;
}

UnobsTransform yaw_only_identity() {
  UnobsTransform t;
  t.sigma(0, 0) = 0.1 * 0.1;
  return t;
}

UnobsTransform full() {
  UnobsTransform t = deterministic();
  t.sigma = Eigen::Vector4d(0.1 * 0.1, 0.1 * 0.1, 0.1 * 0.1, 0.1 * 0.1).asDiagonal();
  return t;
}

const LabScenario& scenario() {
  static const LabScenario s = make_lab_scenario(60, 1);
  return s;
}

}  // namespace

TEST(DeterministicEquivariance, RightInvariantMatchesClosedForm) {
  const auto rep = check_deterministic_equivariance(kRi, deterministic(), 20, 1);
  EXPECT_LT(rep.max_closed_form_error, 1e-6);
  EXPECT_LT(rep.max_pairwise_deviation, 1e-8);
  EXPECT_LT(rep.max_residual, 1e-6);
  EXPECT_LT(rep.condition, 1e3);
}

TEST(DeterministicEquivariance, ConventionalWIsStateIndependent) {
  const auto rep = check_deterministic_equivariance(kCon, deterministic(), 20, 2);
  EXPECT_LT(rep.max_pairwise_deviation, 1e-8);
  EXPECT_LT(rep.max_residual, 1e-6);
}

TEST(DeterministicEquivariance, IdentityTransformGivesIdentityW) {
  for (Retraction r : {kCon, kRi}) {
    const auto rep = check_deterministic_equivariance(r, UnobsTransform{}, 10, 3);
    EXPECT_LT(rep.max_closed_form_error, 1e-8);
    EXPECT_LT(rep.condition, 1.0 + 1e-6);
  }
}

TEST(ChainCondition, RightInvariantHolds) {
  const auto rep = check_chain_condition(kRi, scenario(), full(), 0, 60);
  EXPECT_EQ(rep.residuals.size(), 60u);
  EXPECT_LT(rep.max_residual, 1e-6);
}

TEST(ChainCondition, ConventionalIsViolated) {
  const auto rep = check_chain_condition(kCon, scenario(), yaw_only_identity(), 0, 20);
  EXPECT_GT(rep.max_residual, 1e-3);
}

TEST(ChainCondition, ZeroSigmaGivesZero) {
  for (Retraction r : {kCon, kRi}) {
    const auto rep = check_chain_condition(r, scenario(), deterministic(), 0, 10);
    EXPECT_EQ(rep.max_residual, 0.0);
  }
}

TEST(ChainCondition, IndependentOfSigmaScale) {
  UnobsTransform a = yaw_only_identity();
  UnobsTransform b = a;
  b.sigma *= 25.0;
  const auto ra = check_chain_condition(kCon, scenario(), a, 3, 10);
  const auto rb = check_chain_condition(kCon, scenario(), b, 3, 10);
  ASSERT_EQ(ra.residuals.size(), rb.residuals.size());
  for (std::size_t i = 0; i < ra.residuals.size(); ++i) {
    EXPECT_NEAR(ra.residuals[i], rb.residuals[i], 1e-12 * (1.0 + ra.residuals[i]));
  }
}

TEST(StepIdentities, RightInvariant) {
  const auto rep = check_step_identities(kRi, scenario(), full());
  EXPECT_LT(rep.max_phi_residual, 1e-6);
  EXPECT_LT(rep.max_hn_residual, 1e-8);
}

TEST(StepIdentities, ConventionalFailsPropagationIdentity) {
  const auto rep = check_step_identities(kCon, scenario(), full());
  EXPECT_GT(rep.max_phi_residual + rep.max_hn_residual, 1e-3);
}

TEST(TwinExperiment, IdentityTransformHasNoDivergence) {
  for (Retraction r : {kCon, kRi}) {
    for (TwinMode m : {TwinMode::kDeterministic, TwinMode::kStochasticIdentity, TwinMode::kFull}) {
      const auto rep = run_twin_experiment(r, scenario(), UnobsTransform{}, m);
      EXPECT_LT(rep.max_divergence(), 1e-15) << twin_mode_name(m);
    }
  }
}

TEST(TwinExperiment, DeterministicTwinsAgreeForBothFilters) {
  for (Retraction r : {kCon, kRi}) {
    const auto rep = run_twin_experiment(r, scenario(), deterministic(), TwinMode::kDeterministic);
    EXPECT_EQ(rep.steps.size(), 60u);
    EXPECT_LT(rep.max_divergence(), 1e-8);
    // Gains of the two runs are related by the transform Jacobian.
    EXPECT_LT(rep.max_gain_deviation, 1e-8);
  }
}

TEST(TwinExperiment, RightInvariantStochasticTwinsAgree) {
  for (TwinMode m : {TwinMode::kStochasticIdentity, TwinMode::kFull}) {
    const UnobsTransform t = m == TwinMode::kFull ? full() : yaw_only_identity();
    const auto rep = run_twin_experiment(kRi, scenario(), t, m);
    EXPECT_LT(rep.max_divergence(), 1e-6) << twin_mode_name(m);
  }
}

TEST(TwinExperiment, ConventionalStochasticIdentityDiverges) {
  const auto rep =
      run_twin_experiment(kCon, scenario(), yaw_only_identity(), TwinMode::kStochasticIdentity);
  EXPECT_GT(rep.max_divergence(), 1e-4);
}

TEST(TwinExperiment, CovarianceDifferenceFollowsTheChain) {
  const auto rep = run_twin_experiment(kRi, scenario(), full(), TwinMode::kFull);
  EXPECT_LT(rep.max_cov_deviation, 1e-6);
}

TEST(TwinExperiment, ModeNamesRoundTrip) {
  for (TwinMode m : {TwinMode::kDeterministic, TwinMode::kStochasticIdentity, TwinMode::kFull}) {
    EXPECT_EQ(parse_twin_mode(twin_mode_name(m)), m);
  }
  EXPECT_FALSE(parse_twin_mode("sideways").has_value());
}

TEST(MsckfTwin, RightInvariantIsInvariant) {
  const auto rep = run_msckf_twin(kRi, yaw_only_identity(), TwinMode::kStochasticIdentity, 60, 1);
  EXPECT_GE(rep.updates, 50);
  EXPECT_LT(rep.max_divergence, 1e-6);
}

TEST(MsckfTwin, ConventionalViolatesStochasticIdentity) {
  const auto rep = run_msckf_twin(kCon, yaw_only_identity(), TwinMode::kStochasticIdentity, 60, 1);
  EXPECT_GT(rep.max_divergence, 1e-4);
}

TEST(MsckfTwin, DeterministicTwinsAgree) {
  for (Retraction r : {kCon, kRi}) {
    const auto rep = run_msckf_twin(r, deterministic(), TwinMode::kDeterministic, 30, 2);
    EXPECT_LT(rep.max_divergence, 1e-8);
  }
}
