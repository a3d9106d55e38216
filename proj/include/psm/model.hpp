#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "psm/rational.hpp"

namespace psm {

/// Catalog index of a joint power profile. 1..G_N are feasible profiles,
/// 0 is the sentinel for every non-feasible allocation.
using ProfileIndex = std::int64_t;
inline constexpr ProfileIndex kNullAllocation = 0;

/// Users and bands are 0-based in the library; reports print them 1-based.
using UserId = std::size_t;
using BandId = std::size_t;

/// Largest catalog accepted. Keeps every tax term of the mechanism inside
/// 64-bit exact arithmetic for desk-scale message grids.
inline constexpr ProfileIndex kMaxCatalogSize = ProfileIndex{1} << 24;

/// Minimum population; with two users the cyclic neighbours i+1 and i+2
/// coincide and a user would set its own allocation price.
inline constexpr std::size_t kMinUsers = 3;

/// Utility comparisons in floating point treat differences within this
/// (absolute, scaled by max(1, |value|)) as ties.
inline constexpr double kUtilityTolerance = 1e-12;

struct PowerBundle {
  std::vector<Rational> powers;  // one level per band

  friend bool operator==(const PowerBundle&, const PowerBundle&) = default;
  friend auto operator<=>(const PowerBundle& a, const PowerBundle& b) { return a.powers <=> b.powers; }
};

/// Channel gains h[tx][rx][band], from user tx's transmitter to user rx's receiver.
class GainTensor {
 public:
  GainTensor() = default;
  GainTensor(std::size_t num_users, std::size_t num_bands, Rational fill = Rational{0});

  [[nodiscard]] std::size_t num_users() const noexcept { return num_users_; }
  [[nodiscard]] std::size_t num_bands() const noexcept { return num_bands_; }

  [[nodiscard]] const Rational& at(UserId tx, UserId rx, BandId band) const;
  Rational& at(UserId tx, UserId rx, BandId band);

  friend bool operator==(const GainTensor&, const GainTensor&) = default;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_bands_ = 0;
  std::vector<Rational> data_;
};

/// V(k, t) = v(k) - t with v given per catalog index (values[k-1] = v(k)).
struct QuasiLinearTable {
  std::vector<Rational> values;
};

/// V(k, t) = sum_b w_b * log(1 + SIR_b(k)) - t.
struct SirQuasiLinear {
  std::vector<double> weights;
};

/// V(k, t) = v(k) - beta * t^3; decreasing in t but not quasi-linear.
struct NonQuasiLinear {
  std::vector<Rational> values;
  Rational beta{1};
};

using UtilitySpec = std::variant<QuasiLinearTable, SirQuasiLinear, NonQuasiLinear>;

struct ScenarioConfig {
  std::size_t num_users = 0;
  std::size_t num_bands = 0;
  std::vector<Rational> quant_levels;
  Rational power_budget{0};
  Rational noise_half_density{1};
  GainTensor gains;
  std::vector<UtilitySpec> utilities;

  /// Checks every structural invariant that does not need the catalog.
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// All vectors in Q^f with sum <= budget, lexicographic with Q ascending.
std::vector<PowerBundle> enumerate_bundles(std::span<const Rational> quant_levels, std::size_t num_bands,
                                           const Rational& power_budget);

/// Canonical bijection between 1..G_N and N-tuples of bundles.
///
/// Profiles are ordered lexicographically by (bundle index of user 1, ...,
/// bundle index of user N), i.e. a mixed-radix number with user 1 most
/// significant. Nothing is materialized; both directions are O(N).
class ProfileCatalog {
 public:
  ProfileCatalog(std::size_t num_users, std::vector<PowerBundle> bundles);

  [[nodiscard]] std::size_t num_users() const noexcept { return num_users_; }
  [[nodiscard]] std::size_t num_bands() const noexcept;
  [[nodiscard]] ProfileIndex size() const noexcept { return size_; }
  [[nodiscard]] const std::vector<PowerBundle>& bundles() const noexcept { return bundles_; }

  [[nodiscard]] bool contains(ProfileIndex k) const noexcept { return k >= 1 && k <= size_; }

  /// Bundle indices per user. Throws DomainError for k outside 1..G_N.
  [[nodiscard]] std::vector<std::size_t> profile_of(ProfileIndex k) const;
  [[nodiscard]] std::size_t bundle_index(ProfileIndex k, UserId user) const;
  [[nodiscard]] const Rational& power(ProfileIndex k, UserId user, BandId band) const;

  [[nodiscard]] ProfileIndex index_of(std::span<const std::size_t> bundle_indices) const;
  [[nodiscard]] ProfileIndex index_of(std::span<const PowerBundle> profile) const;

 private:
  std::size_t num_users_;
  std::vector<PowerBundle> bundles_;
  ProfileIndex size_ = 0;
  std::vector<ProfileIndex> place_;  // radix weight per user
};

ProfileCatalog build_catalog(std::size_t num_users, std::vector<PowerBundle> bundles);

/// h_ii p_i / (N0/2 + sum_{j != i} h_ji p_j) on one band, exact.
Rational sir_exact(ProfileIndex k, UserId user, BandId band, const ScenarioConfig& config,
                   const ProfileCatalog& catalog);
double sir(ProfileIndex k, UserId user, BandId band, const ScenarioConfig& config,
           const ProfileCatalog& catalog);

/// A utility level. `exact` is set whenever the variant admits exact evaluation.
struct UtilityValue {
  double approx = 0.0;
  std::optional<Rational> exact;
};

/// -1, 0, +1. Exact when both sides are exact, otherwise within kUtilityTolerance.
int compare_utility(const UtilityValue& a, const UtilityValue& b, double tolerance = kUtilityTolerance);

/// v(k) for allocation k (v(0) = 0), as a utility level.
UtilityValue base_value(const UtilitySpec& spec, ProfileIndex allocation, UserId user,
                        const ScenarioConfig& config, const ProfileCatalog& catalog);

UtilityValue utility_eval(const UtilitySpec& spec, ProfileIndex allocation, const Rational& tax, UserId user,
                          const ScenarioConfig& config, const ProfileCatalog& catalog);

/// A validated scenario with its catalog and cached v_i(k) tables.
///
/// Immutable after construction; every member function is safe to call
/// concurrently.
class Scenario {
 public:
  explicit Scenario(ScenarioConfig config);

  [[nodiscard]] const ScenarioConfig& config() const noexcept { return config_; }
  [[nodiscard]] const ProfileCatalog& catalog() const noexcept { return catalog_; }
  [[nodiscard]] std::size_t num_users() const noexcept { return config_.num_users; }
  [[nodiscard]] ProfileIndex catalog_size() const noexcept { return catalog_.size(); }

  [[nodiscard]] UtilityValue value(UserId user, ProfileIndex allocation) const;
  [[nodiscard]] UtilityValue utility(UserId user, ProfileIndex allocation, const Rational& tax) const;

 private:
  ScenarioConfig config_;
  ProfileCatalog catalog_;
  std::vector<std::vector<double>> approx_;  // [user][k], k = 0..G_N
};

}  // namespace psm
