#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ivins/metrics.hpp"
#include "ivins/sim.hpp"

namespace ivins {

enum class FilterKind { kMsckf, kRiMsckf };

std::string_view filter_name(FilterKind f);
std::optional<FilterKind> parse_filter(std::string_view name);
Retraction filter_retraction(FilterKind f);

struct McOptions {
  int runs = 50;
  std::vector<FilterKind> filters{FilterKind::kMsckf, FilterKind::kRiMsckf};
  /// OpenMP thread count; 0 means IVINS_THREADS or the OpenMP default.
  int threads = 0;
};

struct McResult {
  std::vector<FilterKind> filters;
  std::vector<std::uint64_t> run_seeds;
  std::vector<std::vector<RunMetrics>> runs;  // [run][filter]
  std::vector<RunMetrics> aggregate;          // [filter]
};

/// Seed of run k, derived from the scenario seed through std::seed_seq.
std::uint64_t run_seed(std::uint64_t seed, int run);

/// One run: fresh IMU and camera noise from run_seed, every filter started at
/// the truth with P0 = initial_variance * I and fed identical streams.
std::vector<RunMetrics> simulate_run(const ScenarioConfig& cfg, std::span<const Vec3> landmarks,
                                     std::span<const FilterKind> filters, std::uint64_t seed);

/// Runs in parallel with OpenMP; results do not depend on the thread count.
McResult run_monte_carlo(const ScenarioConfig& cfg, const McOptions& opts);

/// Same computation on the calling thread.
McResult run_monte_carlo_serial(const ScenarioConfig& cfg, const McOptions& opts);

/// Thread count used by run_monte_carlo for the given options.
int resolve_threads(const McOptions& opts);

}  // namespace ivins
