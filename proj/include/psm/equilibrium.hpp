#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "psm/errors.hpp"
#include "psm/mechanism.hpp"
#include "psm/model.hpp"

namespace psm {

/// Finite restriction of each user's message space Z x R+.
struct MessageGrid {
  std::vector<std::int64_t> n_values;  // sorted, unique
  std::vector<Rational> pi_values;     // sorted, unique, non-negative

  /// n in {-1, 0, 1, ..., G_N, N*(G_N + 2)}; pi in {0, step, 2*step, ..., <= pi_max}.
  /// The last n value forces the rounded average off the catalog against any
  /// grid proposals of the others.
  static MessageGrid standard(std::size_t num_users, ProfileIndex g_n, const Rational& pi_step,
                              const Rational& pi_max);

  /// Throws ConfigError unless n covers 0..G_N, its largest value forces
  /// infeasibility against the smallest, and pi contains 0.
  void validate(std::size_t num_users, ProfileIndex g_n) const;

  [[nodiscard]] bool contains(const Message& m) const;
};

/// Which unilateral deviations a NE test quantifies over.
enum class DeviationSpace {
  /// Grid messages only.
  Grid,
  /// Grid messages plus, per deviating user, every integer n that moves the
  /// rounded average onto the catalog (one more on each side lands on 0).
  /// Combined with pi = 0 on the grid this covers every allocation a user
  /// can reach in the unrestricted game, so verdicts do not depend on how
  /// far the n grid extends.
  GridAndReach,
};

enum class Backend { Serial, OpenMP };

struct Deviation {
  UserId user = 0;
  Message message;
  UtilityValue current;
  UtilityValue deviated;

  [[nodiscard]] double gain() const { return deviated.approx - current.approx; }
  [[nodiscard]] std::optional<Rational> exact_gain() const;
};

struct NashCheck {
  bool is_ne = false;
  std::optional<Deviation> best_deviation;  // set iff !is_ne: the largest gain found
  std::uint64_t deviations_checked = 0;
};

/// Candidate n values a user may deviate to, sorted and unique. Always
/// contains the user's current proposal.
std::vector<std::int64_t> deviation_n_values(const MessageProfile& profile, UserId user, const MessageGrid& grid,
                                             ProfileIndex g_n, DeviationSpace space);

NashCheck verify_ne(const Scenario& scenario, const MessageGrid& grid, const MessageProfile& candidate,
                    DeviationSpace space = DeviationSpace::GridAndReach, Backend backend = Backend::OpenMP);

struct BestResponse {
  Message message;
  UtilityValue value;
};

/// Utility-maximizing message for `user` with the others fixed; the
/// lexicographically smallest (n, pi) wins ties.
BestResponse best_response(const Scenario& scenario, const MessageGrid& grid, const MessageProfile& profile,
                           UserId user, DeviationSpace space = DeviationSpace::GridAndReach,
                           Backend backend = Backend::OpenMP);

struct BrStep {
  std::size_t round = 0;
  UserId user = 0;
  Message from;
  Message to;
};

struct BrResult {
  bool converged = false;
  std::size_t rounds = 0;
  MessageProfile start;
  MessageProfile final_profile;
  std::vector<BrStep> log;
  std::optional<NashCheck> fixed_point_check;  // verify_ne of the fixed point
};

/// Round-robin best responses. A user moves only when its best response is
/// strictly better than its current message; a round without moves is a
/// fixed point and is re-checked with verify_ne.
BrResult br_dynamics(const Scenario& scenario, const MessageGrid& grid, const MessageProfile& start,
                     std::size_t max_rounds, DeviationSpace space = DeviationSpace::GridAndReach,
                     Backend backend = Backend::OpenMP);

/// Random grid message profile; the stream depends only on (seed, index).
MessageProfile random_grid_profile(const MessageGrid& grid, std::size_t num_users, std::uint64_t seed,
                                   std::uint64_t index);

/// `starts` seeded trajectories. The OpenMP backend runs trajectories in
/// parallel, each one sequential; results are identical to the serial run.
std::vector<BrResult> br_search(const Scenario& scenario, const MessageGrid& grid, std::size_t starts,
                                std::uint64_t seed, std::size_t max_rounds,
                                DeviationSpace space = DeviationSpace::GridAndReach,
                                Backend backend = Backend::OpenMP);

/// (n_i - n_{i+1})^2 * pi_i == 0 for every user.
bool check_lemma1(const MessageProfile& candidate);

/// Taxes in equilibrium form: 1{avg feasible} * int(avg) * L_i.
/// Throws ContractError when check_lemma1 fails.
std::vector<Rational> ne_tax_form(const MessageProfile& candidate, ProfileIndex g_n);

/// V_i(allocation, t_i) >= V_i(0, 0) per user.
std::vector<bool> individual_rationality_check(const Scenario& scenario, const MessageProfile& candidate);

struct LindahlAllocation {
  ProfileIndex allocation = kNullAllocation;
  std::vector<Rational> taxes;
  std::vector<Rational> prices;

  friend bool operator==(const LindahlAllocation&, const LindahlAllocation&) = default;
};

struct C3Witness {
  UserId user = 0;
  ProfileIndex alternative = kNullAllocation;
  UtilityValue at_allocation;
  UtilityValue at_alternative;
};

struct LindahlCheck {
  LindahlAllocation psi;
  bool c1 = false;           // prices sum to zero
  bool c2 = false;           // taxes sum to zero
  bool budget_line = false;  // t_i == allocation * L_i for every user
  bool c3 = false;           // each user's (allocation, t_i) is optimal on its price line
  bool c3_sign_constrained = false;  // same, with t_i >= 0 imposed on both sides
  std::optional<C3Witness> c3_violation;

  [[nodiscard]] bool all() const { return c1 && c2 && budget_line && c3; }
};

/// Exhaustive check of C1, C2 and C3 over the whole catalog.
LindahlCheck check_lindahl(const Scenario& scenario, const LindahlAllocation& psi);

/// Psi of a (verified) equilibrium: its allocation, taxes and L_i, with all checks.
LindahlCheck ne_to_lindahl(const Scenario& scenario, const MessageProfile& candidate);

class InconsistentPriceSystem : public DomainError {
 public:
  using DomainError::DomainError;
};

class PriceFloorError : public DomainError {
 public:
  PriceFloorError(const std::string& what, Rational minimal_pi1) : DomainError(what), minimal_pi1_(minimal_pi1) {}
  [[nodiscard]] const Rational& minimal_pi1() const noexcept { return minimal_pi1_; }

 private:
  Rational minimal_pi1_;
};

/// Unanimous proposals at psi's allocation with prices solving
/// L_i = (pi_{i+1} - pi_{i+2}) / N, anchored at pi_1.
MessageProfile lindahl_to_ne(const LindahlAllocation& psi, const Rational& pi_1);

/// Smallest pi_1 for which every solved price is non-negative.
Rational minimal_anchor_price(const LindahlAllocation& psi);

struct EquilibriumReport {
  MessageProfile candidate;
  Outcome outcome;
  NashCheck nash;  // restricted to the chosen deviation space
  bool lemma1 = false;
  bool feasible = false;
  std::vector<bool> individually_rational;
  bool tax_form_matches = false;
  std::optional<LindahlCheck> lindahl;  // present for equilibria

  [[nodiscard]] bool is_ne() const { return nash.is_ne; }
  /// Every property an equilibrium must have. Vacuously true for non-equilibria.
  [[nodiscard]] bool chain_holds() const;
};

EquilibriumReport analyze_candidate(const Scenario& scenario, const MessageGrid& grid,
                                    const MessageProfile& candidate,
                                    DeviationSpace space = DeviationSpace::GridAndReach,
                                    Backend backend = Backend::OpenMP);

/// Reports for every unanimity candidate (n_i = k, pi_i = price), k = 1..G_N.
std::vector<EquilibriumReport> unanimity_scan(const Scenario& scenario, const MessageGrid& grid,
                                              const Rational& price,
                                              DeviationSpace space = DeviationSpace::GridAndReach,
                                              Backend backend = Backend::OpenMP);

struct RoundTrip {
  MessageProfile messages;
  EquilibriumReport report;
  LindahlAllocation recovered;
  bool matches = false;  // recovered == input
};

/// lindahl_to_ne, then verify the result on `grid` widened by the solved
/// prices, then re-extract (allocation, taxes, prices).
RoundTrip lindahl_roundtrip(const Scenario& scenario, const MessageGrid& grid, const LindahlAllocation& psi,
                            const Rational& pi_1, DeviationSpace space = DeviationSpace::GridAndReach,
                            Backend backend = Backend::OpenMP);

}  // namespace psm
