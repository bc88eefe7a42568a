#include <gtest/gtest.h>

#include "ivins/errors.hpp"
#include "ivins/monte_carlo.hpp"

using namespace ivins;

namespace {

ScenarioConfig short_scenario(double duration) {
  ScenarioConfig cfg;
  cfg.duration = duration;
  return cfg;
}

void expect_identical(const RunMetrics& a, const RunMetrics& b) {
  EXPECT_EQ(a.t, b.t);
  EXPECT_EQ(a.rms_ori, b.rms_ori);
  EXPECT_EQ(a.rms_pos, b.rms_pos);
  EXPECT_EQ(a.nees_ori, b.nees_ori);
  EXPECT_EQ(a.nees_pose, b.nees_pose);
}

}  // namespace

TEST(FilterNames, RoundTrip) {
  for (FilterKind f : {FilterKind::kMsckf, FilterKind::kRiMsckf}) {
    EXPECT_EQ(parse_filter(filter_name(f)), f);
  }
  EXPECT_FALSE(parse_filter("ekf").has_value());
  EXPECT_EQ(filter_retraction(FilterKind::kRiMsckf), Retraction::kRightInvariant);
}

TEST(RunSeed, DistinctAndStable) {
  EXPECT_EQ(run_seed(1, 0), run_seed(1, 0));
  EXPECT_NE(run_seed(1, 0), run_seed(1, 1));
  EXPECT_NE(run_seed(1, 0), run_seed(2, 0));
}

TEST(MonteCarlo, ParallelMatchesSerialBitForBit) {
  const ScenarioConfig cfg = short_scenario(2.0);
  McOptions opts;
  opts.runs = 3;
  opts.threads = 3;
  const McResult par = run_monte_carlo(cfg, opts);
  const McResult ser = run_monte_carlo_serial(cfg, opts);
  ASSERT_EQ(par.aggregate.size(), 2u);
  EXPECT_EQ(par.run_seeds, ser.run_seeds);
  for (std::size_t f = 0; f < 2; ++f) {
    expect_identical(par.aggregate[f], ser.aggregate[f]);
    for (int k = 0; k < opts.runs; ++k) expect_identical(par.runs[k][f], ser.runs[k][f]);
  }
}

TEST(MonteCarlo, Deterministic) {
  const ScenarioConfig cfg = short_scenario(1.0);
  McOptions opts;
  opts.runs = 2;
  const McResult a = run_monte_carlo(cfg, opts);
  const McResult b = run_monte_carlo(cfg, opts);
  for (std::size_t f = 0; f < 2; ++f) expect_identical(a.aggregate[f], b.aggregate[f]);
}

TEST(MonteCarlo, RunsDifferFromEachOther) {
  const ScenarioConfig cfg = short_scenario(1.0);
  McOptions opts;
  opts.runs = 2;
  opts.filters = {FilterKind::kRiMsckf};
  const McResult r = run_monte_carlo_serial(cfg, opts);
  EXPECT_NE(r.runs[0][0].rms_pos.back(), r.runs[1][0].rms_pos.back());
}

TEST(MonteCarlo, NoiseFreeRunStaysOnTruth) {
  ScenarioConfig cfg = short_scenario(10.0);
  cfg.noise.Q.setZero();
  cfg.noise.pixel_sigma = 1e-6;
  cfg.sensor_noise = false;
  McOptions opts;
  opts.runs = 1;
  const McResult r = run_monte_carlo_serial(cfg, opts);
  for (std::size_t f = 0; f < 2; ++f) {
    const RunMetrics& m = r.aggregate[f];
    EXPECT_EQ(m.size(), 201u);
    for (std::size_t k = 0; k < m.size(); ++k) {
      EXPECT_LT(m.rms_pos[k], 1e-5) << filter_name(r.filters[f]) << " t=" << m.t[k];
      EXPECT_LT(m.rms_ori[k], 1e-6) << filter_name(r.filters[f]) << " t=" << m.t[k];
    }
  }
}

TEST(MonteCarlo, InvalidOptionsThrow) {
  const ScenarioConfig cfg = short_scenario(1.0);
  McOptions opts;
  opts.runs = 0;
  EXPECT_THROW(run_monte_carlo(cfg, opts), ContractError);
  opts.runs = 1;
  opts.filters.clear();
  EXPECT_THROW(run_monte_carlo_serial(cfg, opts), ContractError);
}

TEST(MonteCarlo, ThreadResolution) {
  McOptions opts;
  opts.threads = 5;
  EXPECT_EQ(resolve_threads(opts), 5);
  opts.threads = 0;
  EXPECT_GE(resolve_threads(opts), 1);
}
