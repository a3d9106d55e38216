#include "psm/kernels.hpp"

#include <algorithm>
#include <exception>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psm::kernels {
namespace {

std::int64_t round_mean(__int128 sum, std::size_t size) {
  const auto count = static_cast<__int128>(size);
  const __int128 magnitude = sum < 0 ? -sum : sum;
  const __int128 rounded = (2 * magnitude + count) / (2 * count);
  return static_cast<std::int64_t>(sum < 0 ? -rounded : rounded);
}

Rational squared_gap(std::int64_t a, std::int64_t b) {
  const __int128 d = static_cast<__int128>(a) - b;
  const __int128 sq = d * d;
  if (sq > static_cast<__int128>(INT64_MAX)) throw OverflowError("proposal gap too large");
  return Rational{static_cast<std::int64_t>(sq)};
}

struct Candidate {
  bool set = false;
  Message message;
  UtilityValue value;
  std::uint64_t evaluated = 0;

  void offer(const Message& m, const UtilityValue& v) {
    ++evaluated;
    if (!set || compare_utility(v, value) > 0) {
      set = true;
      message = m;
      value = v;
    }
  }
};

// Everything about a deviation by `user` that does not depend on its own message.
struct DeviationContext {
  __int128 others_sum = 0;
  std::int64_t next_n = 0;
  Rational price;    // L_i
  Rational credit;   // -(n_{i+1} - n_{i+2})^2 pi_{i+1}

  DeviationContext(const MessageProfile& profile, UserId user) {
    for (UserId j = 0; j < profile.size(); ++j) {
      if (j != user) others_sum += profile[j].n;
    }
    next_n = profile.next(user, 1).n;
    price = lindahl_price(profile, user);
    credit = -(squared_gap(profile.next(user, 1).n, profile.next(user, 2).n) * profile.next(user, 1).pi);
  }
};

// Offers every (n, pi) with n = n_values[lo..hi) to `best`, in order.
void scan_range(const Scenario& scenario, const MessageProfile& profile, UserId user, const DeviationContext& ctx,
                std::span<const std::int64_t> n_values, std::span<const Rational> pi_values, std::size_t lo,
                std::size_t hi, Candidate& best) {
  const ProfileIndex g_n = scenario.catalog_size();
  const std::size_t count = profile.size();
  for (std::size_t a = lo; a < hi; ++a) {
    const std::int64_t n = n_values[a];
    const std::int64_t average = round_mean(ctx.others_sum + n, count);
    if (average < 1 || average > g_n) {
      // Tax is identically zero off the catalog: every price gives V(0, 0).
      const UtilityValue v = scenario.utility(user, kNullAllocation, Rational{0});
      best.offer({n, pi_values.front()}, v);
      best.evaluated += pi_values.size() - 1;
      continue;
    }
    const Rational base = Rational{average} * ctx.price + ctx.credit;
    const Rational gap = squared_gap(n, ctx.next_n);
    if (gap.is_zero()) {
      best.offer({n, pi_values.front()}, scenario.utility(user, average, base));
      best.evaluated += pi_values.size() - 1;
      continue;
    }
    for (const Rational& pi : pi_values) {
      best.offer({n, pi}, scenario.utility(user, average, base + gap * pi));
    }
  }
}

ScanResult to_result(const Candidate& c) { return {c.message, c.value, c.evaluated}; }

}  // namespace

ScanResult scan_deviations_serial(const Scenario& scenario, const MessageProfile& profile, UserId user,
                                  std::span<const std::int64_t> n_values, std::span<const Rational> pi_values) {
  if (n_values.empty() || pi_values.empty()) throw DomainError("empty deviation set");
  const ProfileIndex g_n = scenario.catalog_size();
  Candidate best;
  MessageProfile trial = profile;
  for (const std::int64_t n : n_values) {
    for (const Rational& pi : pi_values) {
      trial.set(user, {n, pi});
      const ProfileIndex allocation = clip_allocation(rounded_average(trial), g_n);
      best.offer({n, pi}, scenario.utility(user, allocation, tax(trial, user, g_n)));
    }
  }
  return to_result(best);
}

ScanResult scan_deviations_omp(const Scenario& scenario, const MessageProfile& profile, UserId user,
                               std::span<const std::int64_t> n_values, std::span<const Rational> pi_values) {
  if (n_values.empty() || pi_values.empty()) throw DomainError("empty deviation set");
  const DeviationContext ctx(profile, user);
  const int threads = max_threads();
  std::vector<Candidate> partial(static_cast<std::size_t>(threads));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));

#pragma omp parallel num_threads(threads)
  {
#ifdef _OPENMP
    const auto tid = static_cast<std::size_t>(omp_get_thread_num());
    const auto team = static_cast<std::size_t>(omp_get_num_threads());
#else
    const std::size_t tid = 0;
    const std::size_t team = 1;
#endif
    // Contiguous blocks in thread order, so merging in thread order keeps
    // the serial tie-break.
    const std::size_t total = n_values.size();
    const std::size_t lo = total * tid / team;
    const std::size_t hi = total * (tid + 1) / team;
    try {
      scan_range(scenario, profile, user, ctx, n_values, pi_values, lo, hi, partial[tid]);
    } catch (...) {
      errors[tid] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  Candidate best;
  std::uint64_t evaluated = 0;
  for (const Candidate& c : partial) {
    evaluated += c.evaluated;
    if (!c.set) continue;
    if (!best.set || compare_utility(c.value, best.value) > 0) {
      best.set = true;
      best.message = c.message;
      best.value = c.value;
    }
  }
  best.evaluated = evaluated;
  return to_result(best);
}

BudgetSweep budget_sweep_serial(const MessageGrid& grid, std::size_t num_users, ProfileIndex g_n,
                                std::uint64_t count, std::uint64_t seed) {
  BudgetSweep out;
  for (std::uint64_t j = 0; j < count; ++j) {
    const MessageProfile profile = random_grid_profile(grid, num_users, seed, j);
    ++out.profiles;
    if (clip_allocation(rounded_average(profile), g_n) != kNullAllocation) ++out.feasible;
    if (!budget_sum(profile, g_n).is_zero()) {
      if (!out.counterexample) out.counterexample = profile;
      ++out.nonzero;
    }
  }
  return out;
}

BudgetSweep budget_sweep_omp(const MessageGrid& grid, std::size_t num_users, ProfileIndex g_n, std::uint64_t count,
                             std::uint64_t seed) {
  std::uint64_t nonzero = 0;
  std::uint64_t feasible = 0;
  std::uint64_t first_bad = count;
  std::exception_ptr error;
  const auto total = static_cast<std::int64_t>(count);

#pragma omp parallel for schedule(static) reduction(+ : nonzero, feasible) reduction(min : first_bad)
  for (std::int64_t j = 0; j < total; ++j) {
    try {
      const MessageProfile profile = random_grid_profile(grid, num_users, seed, static_cast<std::uint64_t>(j));
      if (clip_allocation(rounded_average(profile), g_n) != kNullAllocation) ++feasible;
      if (!budget_sum(profile, g_n).is_zero()) {
        ++nonzero;
        first_bad = std::min(first_bad, static_cast<std::uint64_t>(j));
      }
    } catch (...) {
#pragma omp critical(psm_budget_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  BudgetSweep out;
  out.profiles = count;
  out.nonzero = nonzero;
  out.feasible = feasible;
  if (first_bad < count) out.counterexample = random_grid_profile(grid, num_users, seed, first_bad);
  return out;
}

void set_num_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace psm::kernels

namespace psm {

MessageProfile random_grid_profile(const MessageGrid& grid, std::size_t num_users, std::uint64_t seed,
                                   std::uint64_t index) {
  if (grid.n_values.empty() || grid.pi_values.empty()) throw DomainError("empty message grid");
  // One engine per (seed, index): reproducible under any thread count.
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<Message> messages(num_users);
  for (auto& m : messages) {
    m.n = grid.n_values[rng() % grid.n_values.size()];
    m.pi = grid.pi_values[rng() % grid.pi_values.size()];
  }
  return MessageProfile(std::move(messages));
}

}  // namespace psm
