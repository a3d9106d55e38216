#pragma once

// Data-parallel inner loops. Each kernel has a serial reference that goes
// through the public mechanism functions, and an OpenMP version that
// evaluates the same quantity incrementally. Tests hold them equal.

#include <cstdint>
#include <optional>
#include <span>

#include "psm/equilibrium.hpp"
#include "psm/mechanism.hpp"
#include "psm/model.hpp"

namespace psm::kernels {

struct ScanResult {
  Message best;
  UtilityValue value;
  std::uint64_t evaluated = 0;
};

/// Best message for `user` over n_values x pi_values, others fixed.
/// First maximizer in (n, pi) order wins.
ScanResult scan_deviations_serial(const Scenario& scenario, const MessageProfile& profile, UserId user,
                                  std::span<const std::int64_t> n_values, std::span<const Rational> pi_values);
ScanResult scan_deviations_omp(const Scenario& scenario, const MessageProfile& profile, UserId user,
                               std::span<const std::int64_t> n_values, std::span<const Rational> pi_values);

struct BudgetSweep {
  std::uint64_t profiles = 0;
  std::uint64_t nonzero = 0;  // must stay 0
  std::uint64_t feasible = 0;  // profiles whose rounded average is on the catalog
  std::optional<MessageProfile> counterexample;
};

/// budget_sum over `count` seeded random grid profiles.
BudgetSweep budget_sweep_serial(const MessageGrid& grid, std::size_t num_users, ProfileIndex g_n,
                                std::uint64_t count, std::uint64_t seed);
BudgetSweep budget_sweep_omp(const MessageGrid& grid, std::size_t num_users, ProfileIndex g_n, std::uint64_t count,
                             std::uint64_t seed);

/// Thread-count helpers; no-ops without OpenMP.
void set_num_threads(int threads);
int max_threads();

}  // namespace psm::kernels
