// Serial reference vs OpenMP kernels on the desk scenario.
// Arg(0) is the serial path; Arg(k > 0) runs OpenMP with k threads.

#include <benchmark/benchmark.h>

#include "psm/equilibrium.hpp"
#include "psm/io.hpp"
#include "psm/kernels.hpp"

namespace {

using namespace psm;

struct Desk {
  Scenario scenario;
  MessageGrid grid;
  std::uint64_t seed;
};

const Desk& desk() {
  static const Desk d = [] {
    auto file = io::load_scenario(PSM_SCENARIO_DIR "/desk.json");
    Scenario s(file.config);
    auto grid = MessageGrid::standard(s.num_users(), s.catalog_size(), file.grid.pi_step, file.grid.pi_max);
    return Desk{std::move(s), std::move(grid), file.seed};
  }();
  return d;
}

Backend setup(const benchmark::State& state) {
  const auto threads = static_cast<int>(state.range(0));
  if (threads > 0) kernels::set_num_threads(threads);
  return threads > 0 ? Backend::OpenMP : Backend::Serial;
}

void BM_DeviationScan(benchmark::State& state) {
  const auto& d = desk();
  const bool omp = setup(state) == Backend::OpenMP;
  const auto profile = random_grid_profile(d.grid, 3, d.seed, 0);
  const auto ns = deviation_n_values(profile, 0, d.grid, d.scenario.catalog_size(), DeviationSpace::GridAndReach);
  for (auto _ : state) {
    auto r = omp ? kernels::scan_deviations_omp(d.scenario, profile, 0, ns, d.grid.pi_values)
                 : kernels::scan_deviations_serial(d.scenario, profile, 0, ns, d.grid.pi_values);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ns.size() * d.grid.pi_values.size()));
}

void BM_BudgetSweep(benchmark::State& state) {
  const auto& d = desk();
  const bool omp = setup(state) == Backend::OpenMP;
  constexpr std::uint64_t kProfiles = 20000;
  for (auto _ : state) {
    auto r = omp ? kernels::budget_sweep_omp(d.grid, 3, d.scenario.catalog_size(), kProfiles, d.seed)
                 : kernels::budget_sweep_serial(d.grid, 3, d.scenario.catalog_size(), kProfiles, d.seed);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * kProfiles);
}

void BM_UnanimityScan(benchmark::State& state) {
  const auto& d = desk();
  const Backend backend = setup(state);
  for (auto _ : state) {
    auto r = unanimity_scan(d.scenario, d.grid, Rational{0}, DeviationSpace::GridAndReach, backend);
    benchmark::DoNotOptimize(r);
  }
}

void BM_BrSearch(benchmark::State& state) {
  const auto& d = desk();
  const Backend backend = setup(state);
  for (auto _ : state) {
    auto r = br_search(d.scenario, d.grid, 20, d.seed, 50, DeviationSpace::GridAndReach, backend);
    benchmark::DoNotOptimize(r);
  }
}

#define PSM_THREADS Arg(0)->Arg(1)->Arg(2)->Arg(4)

BENCHMARK(BM_DeviationScan)->PSM_THREADS;
BENCHMARK(BM_BudgetSweep)->PSM_THREADS->Unit(benchmark::kMillisecond);
BENCHMARK(BM_UnanimityScan)->PSM_THREADS->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BrSearch)->PSM_THREADS->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
