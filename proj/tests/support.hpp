#pragma once

// Independent oracles and small scenario builders shared by the tests.
// The oracles are written straight from the definitions and share no code
// with the library beyond Rational.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "psm/io.hpp"
#include "psm/mechanism.hpp"
#include "psm/model.hpp"

namespace psm::testing {

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(PSM_SCENARIO_DIR) / name;
}

inline io::ScenarioFile load(const std::string& name) { return io::load_scenario(scenario_path(name)); }

/// Nearest integer to s/n by search; halves go to the larger magnitude.
inline std::int64_t oracle_round(std::int64_t s, std::int64_t n) {
  const std::int64_t guess = s / n;
  std::int64_t best = guess;
  for (std::int64_t r = guess - 2; r <= guess + 2; ++r) {
    const std::int64_t gap = std::llabs(n * r - s);
    const std::int64_t best_gap = std::llabs(n * best - s);
    if (gap < best_gap || (gap == best_gap && std::llabs(r) > std::llabs(best))) best = r;
  }
  return best;
}

inline std::vector<Rational> oracle_taxes(const std::vector<std::int64_t>& n, const std::vector<Rational>& pi,
                                          std::int64_t g_n) {
  const auto N = static_cast<std::int64_t>(n.size());
  std::int64_t s = 0;
  for (const auto x : n) s += x;
  const std::int64_t avg = oracle_round(s, N);
  std::vector<Rational> t(n.size(), Rational{0});
  if (avg < 1 || avg > g_n) return t;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const std::size_t a = (i + 1) % n.size();
    const std::size_t b = (i + 2) % n.size();
    const Rational d1{(n[i] - n[a]) * (n[i] - n[a])};
    const Rational d2{(n[a] - n[b]) * (n[a] - n[b])};
    t[i] = Rational{avg} * (pi[a] - pi[b]) / Rational{N} + d1 * pi[i] - d2 * pi[a];
  }
  return t;
}

/// Every vector of Q^f, filtered by the budget, in lexicographic order.
inline std::vector<std::vector<Rational>> oracle_bundles(const std::vector<Rational>& q, std::size_t f,
                                                         const Rational& budget) {
  std::vector<std::vector<Rational>> out;
  std::size_t total = 1;
  for (std::size_t b = 0; b < f; ++b) total *= q.size();
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<Rational> v(f);
    std::size_t rest = code;
    for (std::size_t b = f; b-- > 0;) {
      v[b] = q[rest % q.size()];
      rest /= q.size();
    }
    Rational sum{0};
    for (const auto& x : v) sum += x;
    if (sum <= budget) out.push_back(v);
  }
  return out;
}

inline MessageProfile profile_of(const std::vector<std::int64_t>& n, const std::vector<Rational>& pi) {
  std::vector<Message> m;
  for (std::size_t i = 0; i < n.size(); ++i) m.push_back({n[i], pi[i]});
  return MessageProfile(std::move(m));
}

inline MessageProfile unanimity(std::size_t users, std::int64_t k, const Rational& pi = Rational{0}) {
  return MessageProfile(std::vector<Message>(users, Message{k, pi}));
}

/// N users, one band, Q = {0, 1}, budget 1: 2 bundles, G_N = 2^N.
inline ScenarioConfig tiny_config(std::size_t users = 3) {
  ScenarioConfig c;
  c.num_users = users;
  c.num_bands = 1;
  c.quant_levels = {Rational{0}, Rational{1}};
  c.power_budget = Rational{1};
  c.noise_half_density = Rational{1};
  c.gains = GainTensor(users, 1, Rational{1, 4});
  for (UserId u = 0; u < users; ++u) c.gains.at(u, u, 0) = Rational{1};
  return c;
}

/// Table utilities from a function of (user, k).
template <typename F>
ScenarioConfig with_tables(ScenarioConfig c, F&& value) {
  std::int64_t g = 1;
  const std::int64_t bundles = static_cast<std::int64_t>(
      enumerate_bundles(c.quant_levels, c.num_bands, c.power_budget).size());
  for (std::size_t u = 0; u < c.num_users; ++u) g *= bundles;
  c.utilities.clear();
  for (UserId u = 0; u < c.num_users; ++u) {
    QuasiLinearTable t;
    for (std::int64_t k = 1; k <= g; ++k) t.values.push_back(value(u, k));
    c.utilities.emplace_back(std::move(t));
  }
  return c;
}

/// Deterministic random rationals and integers for hand-rolled property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
  }
  Rational rational(std::int64_t lo, std::int64_t hi, std::int64_t max_den = 8) {
    const std::int64_t den = integer(1, max_den);
    return Rational{integer(lo * den, hi * den), den};
  }
  Rational nonneg(std::int64_t hi, std::int64_t max_den = 8) { return rational(0, hi, max_den); }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace psm::testing
