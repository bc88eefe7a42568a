#include "ivins/monte_carlo.hpp"

#include <array>
#include <cstdlib>
#include <exception>
#include <random>

#include <omp.h>

#include "ivins/errors.hpp"
#include "ivins/msckf.hpp"

namespace ivins {

std::string_view filter_name(FilterKind f) {
  return f == FilterKind::kMsckf ? "msckf" : "ri-msckf";
}

std::optional<FilterKind> parse_filter(std::string_view name) {
  if (name == "msckf") return FilterKind::kMsckf;
  if (name == "ri-msckf") return FilterKind::kRiMsckf;
  return std::nullopt;
}

Retraction filter_retraction(FilterKind f) {
  return f == FilterKind::kMsckf ? Retraction::kConventional : Retraction::kRightInvariant;
}

std::uint64_t run_seed(std::uint64_t seed, int run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(run)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), which};
  return std::mt19937_64(seq);
}

std::vector<Vec3> scenario_landmarks(const ScenarioConfig& cfg) {
  std::mt19937_64 rng = stream(cfg.seed, 0);
  return generate_landmarks(cfg, rng);
}

McResult prepare(const ScenarioConfig& cfg, const McOptions& opts) {
  cfg.validate();
  if (opts.runs < 1) throw ContractError("run_monte_carlo: runs must be >= 1");
  if (opts.filters.empty()) throw ContractError("run_monte_carlo: no filters selected");
  McResult res;
  res.filters = opts.filters;
  for (int k = 0; k < opts.runs; ++k) res.run_seeds.push_back(run_seed(cfg.seed, k));
  res.runs.resize(opts.runs);
  return res;
}

void finish(McResult& res) {
  for (std::size_t f = 0; f < res.filters.size(); ++f) {
    std::vector<const RunMetrics*> series;
    for (const auto& run : res.runs) series.push_back(&run[f]);
    res.aggregate.push_back(aggregate(series));
  }
}

}  // namespace

std::vector<RunMetrics> simulate_run(const ScenarioConfig& cfg, std::span<const Vec3> landmarks,
                                     std::span<const FilterKind> filters, std::uint64_t seed) {
  const Trajectory truth(cfg);
  std::mt19937_64 imu_rng = stream(seed, 1);
  std::mt19937_64 cam_rng = stream(seed, 2);
  const ImuStream imu = synthesize_imu(truth, cfg, imu_rng);
  const std::vector<Frame> frames = synthesize_camera(truth, landmarks, cfg.camera, cfg, cam_rng);
  const int per = cfg.imu_per_frame();

  std::vector<RunMetrics> out;
  for (FilterKind kind : filters) {
    const Retraction r = filter_retraction(kind);
    GaussianBelief<MsckfState> init;
    init.mean.imu = true_state(truth, imu, 0);
    init.cov = MatrixXd::Identity(kImuDim, kImuDim) * cfg.initial_variance;
    MsckfFilter filter(r, cfg.camera, cfg.gravity, cfg.noise, cfg.window, init);
    RunMetrics m;
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const int fk = static_cast<int>(k);
      filter.process_frame(imu_between_frames(imu, cfg, fk), frames[k].t,
                           frames[k].measurements);
      const auto& b = filter.belief();
      m.push(frames[k].t, compute_metrics(true_state(truth, imu, k * per), b.mean.imu, b.cov, r));
    }
    out.push_back(std::move(m));
  }
  return out;
}

int resolve_threads(const McOptions& opts) {
  if (opts.threads > 0) return opts.threads;
  if (const char* env = std::getenv("IVINS_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

McResult run_monte_carlo(const ScenarioConfig& cfg, const McOptions& opts) {
  McResult res = prepare(cfg, opts);
  const std::vector<Vec3> landmarks = scenario_landmarks(cfg);
  std::vector<std::exception_ptr> errors(opts.runs);
  const int threads = resolve_threads(opts);

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int k = 0; k < opts.runs; ++k) {
    try {
      res.runs[k] = simulate_run(cfg, landmarks, res.filters, res.run_seeds[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  finish(res);
  return res;
}

McResult run_monte_carlo_serial(const ScenarioConfig& cfg, const McOptions& opts) {
  McResult res = prepare(cfg, opts);
  const std::vector<Vec3> landmarks = scenario_landmarks(cfg);
  for (int k = 0; k < opts.runs; ++k) {
    res.runs[k] = simulate_run(cfg, landmarks, res.filters, res.run_seeds[k]);
  }
  finish(res);
  return res;
}

}  // namespace ivins
