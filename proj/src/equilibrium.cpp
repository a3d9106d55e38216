#include "psm/equilibrium.hpp"

#include <algorithm>
#include <exception>
#include <string>

#include "psm/kernels.hpp"

namespace psm {
namespace {

kernels::ScanResult scan(const Scenario& scenario, const MessageProfile& profile, UserId user,
                         std::span<const std::int64_t> n_values, std::span<const Rational> pi_values,
                         Backend backend) {
  return backend == Backend::OpenMP ? kernels::scan_deviations_omp(scenario, profile, user, n_values, pi_values)
                                    : kernels::scan_deviations_serial(scenario, profile, user, n_values, pi_values);
}

UtilityValue current_utility(const Scenario& scenario, const MessageProfile& profile, UserId user) {
  const ProfileIndex g_n = scenario.catalog_size();
  return scenario.utility(user, clip_allocation(rounded_average(profile), g_n), tax(profile, user, g_n));
}

void check_size(const Scenario& scenario, const MessageProfile& profile) {
  if (profile.size() != scenario.num_users()) {
    throw DomainError("message profile has " + std::to_string(profile.size()) + " entries, scenario has " +
                      std::to_string(scenario.num_users()) + " users");
  }
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

// ParallelFor over [0, count) that forwards the first exception.
template <class Body>
void parallel_for(std::size_t count, Backend backend, Body&& body) {
  if (backend == Backend::Serial) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::exception_ptr error;
  const auto total = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t k = 0; k < total; ++k) {
    try {
      body(static_cast<std::size_t>(k));
    } catch (...) {
#pragma omp critical(psm_parallel_for_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

MessageGrid MessageGrid::standard(std::size_t num_users, ProfileIndex g_n, const Rational& pi_step,
                                  const Rational& pi_max) {
  if (pi_step.sign() <= 0) throw ConfigError("grid.pi_step: must be positive");
  if (pi_max.sign() < 0) throw ConfigError("grid.pi_max: must be non-negative");
  MessageGrid grid;
  grid.n_values.reserve(static_cast<std::size_t>(g_n) + 3);
  for (std::int64_t n = -1; n <= g_n; ++n) grid.n_values.push_back(n);
  grid.n_values.push_back(static_cast<std::int64_t>(num_users) * (g_n + 2));
  for (Rational pi{0}; pi <= pi_max; pi += pi_step) grid.pi_values.push_back(pi);
  return grid;
}

void MessageGrid::validate(std::size_t num_users, ProfileIndex g_n) const {
  if (!std::is_sorted(n_values.begin(), n_values.end()) ||
      std::adjacent_find(n_values.begin(), n_values.end()) != n_values.end()) {
    throw ConfigError("grid: n values must be sorted and unique");
  }
  if (!std::is_sorted(pi_values.begin(), pi_values.end()) ||
      std::adjacent_find(pi_values.begin(), pi_values.end()) != pi_values.end()) {
    throw ConfigError("grid: pi values must be sorted and unique");
  }
  if (pi_values.empty() || !pi_values.front().is_zero()) throw ConfigError("grid: pi values must contain 0");
  for (std::int64_t n = 0; n <= g_n; ++n) {
    if (!std::binary_search(n_values.begin(), n_values.end(), n)) {
      throw ConfigError("grid: n values must contain 0..G_N, missing " + std::to_string(n));
    }
  }
  // Some n must push the average off the catalog whatever the others send.
  if (n_values.empty()) throw ConfigError("grid: n values are empty");
  std::vector<std::int64_t> worst(num_users, n_values.front());
  worst.front() = n_values.back();
  if (clip_allocation(rounded_average(worst), g_n) != kNullAllocation) {
    throw ConfigError("grid: n values need an infeasibility-forcing value, e.g. " +
                      std::to_string(static_cast<std::int64_t>(num_users) * (g_n + 2)));
  }
}

bool MessageGrid::contains(const Message& m) const {
  return std::binary_search(n_values.begin(), n_values.end(), m.n) &&
         std::binary_search(pi_values.begin(), pi_values.end(), m.pi);
}

std::optional<Rational> Deviation::exact_gain() const {
  if (current.exact && deviated.exact) return *deviated.exact - *current.exact;
  return std::nullopt;
}

std::vector<std::int64_t> deviation_n_values(const MessageProfile& profile, UserId user, const MessageGrid& grid,
                                             ProfileIndex g_n, DeviationSpace space) {
  std::vector<std::int64_t> out = grid.n_values;
  out.push_back(profile[user].n);
  if (space == DeviationSpace::GridAndReach) {
    std::int64_t others = 0;
    for (UserId j = 0; j < profile.size(); ++j) {
      if (j != user && __builtin_add_overflow(others, profile[j].n, &others)) {
        throw OverflowError("proposal sum overflow");
      }
    }
    // round(s / N) lands in 1..G_N exactly for ceil(N/2) <= s <= floor((2 G_N N + N - 1) / 2).
    const auto count = static_cast<std::int64_t>(profile.size());
    const std::int64_t sum_lo = (count + 1) / 2;
    const std::int64_t sum_hi = floor_div(2 * g_n * count + count - 1, 2);
    for (std::int64_t s = sum_lo - 1; s <= sum_hi + 1; ++s) out.push_back(s - others);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

NashCheck verify_ne(const Scenario& scenario, const MessageGrid& grid, const MessageProfile& candidate,
                    DeviationSpace space, Backend backend) {
  check_size(scenario, candidate);
  NashCheck out;
  out.is_ne = true;
  const ProfileIndex g_n = scenario.catalog_size();
  for (UserId i = 0; i < candidate.size(); ++i) {
    const auto n_values = deviation_n_values(candidate, i, grid, g_n, space);
    const auto best = scan(scenario, candidate, i, n_values, grid.pi_values, backend);
    out.deviations_checked += best.evaluated;
    const UtilityValue now = current_utility(scenario, candidate, i);
    if (compare_utility(best.value, now) <= 0) continue;
    out.is_ne = false;
    Deviation d{i, best.best, now, best.value};
    if (!out.best_deviation) {
      out.best_deviation = d;
      continue;
    }
    const auto g_new = d.exact_gain();
    const auto g_old = out.best_deviation->exact_gain();
    const bool larger = (g_new && g_old) ? *g_new > *g_old : d.gain() > out.best_deviation->gain();
    if (larger) out.best_deviation = d;
  }
  return out;
}

BestResponse best_response(const Scenario& scenario, const MessageGrid& grid, const MessageProfile& profile,
                           UserId user, DeviationSpace space, Backend backend) {
  check_size(scenario, profile);
  const auto n_values = deviation_n_values(profile, user, grid, scenario.catalog_size(), space);
  const auto best = scan(scenario, profile, user, n_values, grid.pi_values, backend);
  return {best.best, best.value};
}

BrResult br_dynamics(const Scenario& scenario, const MessageGrid& grid, const MessageProfile& start,
                     std::size_t max_rounds, DeviationSpace space, Backend backend) {
  check_size(scenario, start);
  BrResult out;
  out.start = start;
  MessageProfile profile = start;
  for (std::size_t round = 1; round <= max_rounds; ++round) {
    bool moved = false;
    for (UserId i = 0; i < profile.size(); ++i) {
      const BestResponse br = best_response(scenario, grid, profile, i, space, backend);
      if (compare_utility(br.value, current_utility(scenario, profile, i)) > 0) {
        out.log.push_back({round, i, profile[i], br.message});
        profile.set(i, br.message);
        moved = true;
      }
    }
    out.rounds = round;
    if (!moved) {
      out.converged = true;
      break;
    }
  }
  out.final_profile = profile;
  if (out.converged) out.fixed_point_check = verify_ne(scenario, grid, profile, space, backend);
  return out;
}

std::vector<BrResult> br_search(const Scenario& scenario, const MessageGrid& grid, std::size_t starts,
                                std::uint64_t seed, std::size_t max_rounds, DeviationSpace space, Backend backend) {
  std::vector<BrResult> out(starts);
  parallel_for(starts, backend, [&](std::size_t s) {
    const MessageProfile start = random_grid_profile(grid, scenario.num_users(), seed, s);
    out[s] = br_dynamics(scenario, grid, start, max_rounds, space, Backend::Serial);
  });
  return out;
}

bool check_lemma1(const MessageProfile& candidate) {
  for (UserId i = 0; i < candidate.size(); ++i) {
    if (candidate[i].n != candidate.next(i, 1).n && !candidate[i].pi.is_zero()) return false;
  }
  return true;
}

std::vector<Rational> ne_tax_form(const MessageProfile& candidate, ProfileIndex g_n) {
  if (!check_lemma1(candidate)) {
    throw ContractError("equilibrium tax form requires (n_i - n_{i+1})^2 pi_i = 0 for every user");
  }
  const std::int64_t average = rounded_average(candidate);
  const bool on_catalog = average >= 1 && average <= g_n;
  std::vector<Rational> out;
  out.reserve(candidate.size());
  for (UserId i = 0; i < candidate.size(); ++i) {
    out.push_back(on_catalog ? Rational{average} * lindahl_price(candidate, i) : Rational{0});
  }
  return out;
}

std::vector<bool> individual_rationality_check(const Scenario& scenario, const MessageProfile& candidate) {
  check_size(scenario, candidate);
  std::vector<bool> out(candidate.size());
  for (UserId i = 0; i < candidate.size(); ++i) {
    const UtilityValue endowment = scenario.utility(i, kNullAllocation, Rational{0});
    out[i] = compare_utility(current_utility(scenario, candidate, i), endowment) >= 0;
  }
  return out;
}

LindahlCheck check_lindahl(const Scenario& scenario, const LindahlAllocation& psi) {
  const std::size_t users = scenario.num_users();
  if (psi.taxes.size() != users || psi.prices.size() != users) {
    throw DomainError("Lindahl allocation needs one tax and one price per user");
  }
  LindahlCheck out;
  out.psi = psi;
  Rational price_sum{0};
  Rational tax_sum{0};
  for (UserId i = 0; i < users; ++i) {
    price_sum += psi.prices[i];
    tax_sum += psi.taxes[i];
  }
  out.c1 = price_sum.is_zero();
  out.c2 = tax_sum.is_zero();

  const Rational allocation{psi.allocation};
  out.budget_line = true;
  for (UserId i = 0; i < users; ++i) {
    if (psi.taxes[i] != allocation * psi.prices[i]) out.budget_line = false;
  }

  // C3 ranges over feasible profiles only; an infeasible psi cannot be optimal.
  const bool feasible = scenario.catalog().contains(psi.allocation);
  out.c3 = feasible;
  out.c3_sign_constrained = feasible;
  for (UserId i = 0; i < users && feasible; ++i) {
    const UtilityValue here = scenario.utility(i, psi.allocation, psi.taxes[i]);
    const bool here_signed = psi.taxes[i].sign() >= 0;
    if (!here_signed) out.c3_sign_constrained = false;
    for (ProfileIndex zeta = 1; zeta <= scenario.catalog_size(); ++zeta) {
      const Rational t = Rational{zeta} * psi.prices[i];
      const UtilityValue there = scenario.utility(i, zeta, t);
      if (compare_utility(there, here) <= 0) continue;
      if (out.c3) {
        out.c3 = false;
        out.c3_violation = C3Witness{i, zeta, here, there};
      }
      if (t.sign() >= 0) out.c3_sign_constrained = false;
    }
  }
  return out;
}

LindahlCheck ne_to_lindahl(const Scenario& scenario, const MessageProfile& candidate) {
  check_size(scenario, candidate);
  const Outcome o = outcome(candidate, scenario.catalog());
  return check_lindahl(scenario, LindahlAllocation{o.allocation, o.taxes, lindahl_prices(candidate)});
}

Rational minimal_anchor_price(const LindahlAllocation& psi) {
  const std::size_t users = psi.prices.size();
  const Rational count{static_cast<std::int64_t>(users)};
  // offset_j = pi_j - pi_1; pi_2 = pi_1 - N L_N, pi_{j+1} = pi_j - N L_{j-1}.
  Rational offset{0};
  Rational lowest{0};
  for (std::size_t j = 1; j < users; ++j) {
    const Rational& price = (j == 1) ? psi.prices[users - 1] : psi.prices[j - 2];
    offset -= count * price;
    lowest = std::min(lowest, offset);
  }
  return -lowest;
}

MessageProfile lindahl_to_ne(const LindahlAllocation& psi, const Rational& pi_1) {
  const std::size_t users = psi.prices.size();
  if (users < kMinUsers) throw DomainError("Lindahl allocation needs at least 3 users");
  Rational price_sum{0};
  for (const auto& p : psi.prices) price_sum += p;
  if (!price_sum.is_zero()) {
    throw InconsistentPriceSystem("personalized prices sum to " + price_sum.str() + ", the price system needs 0");
  }
  const Rational floor = minimal_anchor_price(psi);
  if (pi_1 < floor) {
    throw PriceFloorError("anchor price " + pi_1.str() + " gives a negative price; need pi_1 >= " + floor.str(),
                          floor);
  }
  const Rational count{static_cast<std::int64_t>(users)};
  std::vector<Message> messages(users);
  messages[0] = {psi.allocation, pi_1};
  for (std::size_t j = 1; j < users; ++j) {
    const Rational& price = (j == 1) ? psi.prices[users - 1] : psi.prices[j - 2];
    messages[j] = {psi.allocation, messages[j - 1].pi - count * price};
  }
  return MessageProfile(std::move(messages));
}

bool EquilibriumReport::chain_holds() const {
  if (!nash.is_ne) return true;
  const bool rational = std::all_of(individually_rational.begin(), individually_rational.end(), [](bool b) { return b; });
  return lemma1 && feasible && rational && tax_form_matches && lindahl && lindahl->c1 && lindahl->c2 &&
         lindahl->budget_line && lindahl->c3;
}

EquilibriumReport analyze_candidate(const Scenario& scenario, const MessageGrid& grid,
                                    const MessageProfile& candidate, DeviationSpace space, Backend backend) {
  check_size(scenario, candidate);
  EquilibriumReport r;
  r.candidate = candidate;
  r.outcome = outcome(candidate, scenario.catalog());
  r.nash = verify_ne(scenario, grid, candidate, space, backend);
  r.lemma1 = check_lemma1(candidate);
  r.feasible = r.outcome.allocation != kNullAllocation;
  r.individually_rational = individual_rationality_check(scenario, candidate);
  r.tax_form_matches = r.lemma1 && ne_tax_form(candidate, scenario.catalog_size()) == r.outcome.taxes;
  if (r.nash.is_ne) r.lindahl = ne_to_lindahl(scenario, candidate);
  return r;
}

std::vector<EquilibriumReport> unanimity_scan(const Scenario& scenario, const MessageGrid& grid,
                                              const Rational& price, DeviationSpace space, Backend backend) {
  const auto g_n = static_cast<std::size_t>(scenario.catalog_size());
  std::vector<EquilibriumReport> out(g_n);
  parallel_for(g_n, backend, [&](std::size_t idx) {
    const auto k = static_cast<std::int64_t>(idx + 1);
    const MessageProfile candidate(std::vector<Message>(scenario.num_users(), Message{k, price}));
    out[idx] = analyze_candidate(scenario, grid, candidate, space, Backend::Serial);
  });
  return out;
}

RoundTrip lindahl_roundtrip(const Scenario& scenario, const MessageGrid& grid, const LindahlAllocation& psi,
                            const Rational& pi_1, DeviationSpace space, Backend backend) {
  RoundTrip out;
  out.messages = lindahl_to_ne(psi, pi_1);
  MessageGrid widened = grid;
  for (const auto& m : out.messages.messages()) widened.pi_values.push_back(m.pi);
  std::sort(widened.pi_values.begin(), widened.pi_values.end());
  widened.pi_values.erase(std::unique(widened.pi_values.begin(), widened.pi_values.end()), widened.pi_values.end());
  out.report = analyze_candidate(scenario, widened, out.messages, space, backend);
  out.recovered = LindahlAllocation{out.report.outcome.allocation, out.report.outcome.taxes,
                                    lindahl_prices(out.messages)};
  out.matches = out.recovered == psi;
  return out;
}

}  // namespace psm
