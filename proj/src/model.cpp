#include "psm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "psm/errors.hpp"

namespace psm {
namespace {

std::string field(const std::string& name, std::size_t i) { return name + "[" + std::to_string(i) + "]"; }

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double cubic(double t) { return t * t * t; }

}  // namespace

GainTensor::GainTensor(std::size_t num_users, std::size_t num_bands, Rational fill)
    : num_users_(num_users), num_bands_(num_bands), data_(num_users * num_users * num_bands, fill) {}

const Rational& GainTensor::at(UserId tx, UserId rx, BandId band) const {
  if (tx >= num_users_ || rx >= num_users_ || band >= num_bands_) throw DomainError("gain index out of range");
  return data_[(tx * num_users_ + rx) * num_bands_ + band];
}

Rational& GainTensor::at(UserId tx, UserId rx, BandId band) {
  if (tx >= num_users_ || rx >= num_users_ || band >= num_bands_) throw DomainError("gain index out of range");
  return data_[(tx * num_users_ + rx) * num_bands_ + band];
}

void ScenarioConfig::validate() const {
  if (num_users < kMinUsers) {
    throw ConfigError("num_users: need at least " + std::to_string(kMinUsers) + " users, got " +
                      std::to_string(num_users));
  }
  if (num_bands == 0) throw ConfigError("num_bands: must be positive");
  if (quant_levels.empty() || !quant_levels.front().is_zero()) {
    throw ConfigError("quant_levels: must start with level 0");
  }
  for (std::size_t k = 1; k < quant_levels.size(); ++k) {
    if (quant_levels[k] <= quant_levels[k - 1]) {
      throw ConfigError(field("quant_levels", k) + ": levels must be strictly increasing");
    }
  }
  if (power_budget.sign() < 0) throw ConfigError("power_budget: must be non-negative");
  if (noise_half_density.sign() <= 0) throw ConfigError("noise_half_density: must be positive");
  if (gains.num_users() != num_users || gains.num_bands() != num_bands) {
    throw ConfigError("gains: shape must be num_users x num_users x num_bands");
  }
  for (UserId tx = 0; tx < num_users; ++tx) {
    for (UserId rx = 0; rx < num_users; ++rx) {
      for (BandId b = 0; b < num_bands; ++b) {
        if (gains.at(tx, rx, b).sign() < 0) {
          throw ConfigError(field(field(field("gains", tx), rx), b) + ": gains must be non-negative");
        }
      }
    }
  }
  if (utilities.size() != num_users) throw ConfigError("utilities: need one entry per user");
  for (std::size_t i = 0; i < utilities.size(); ++i) {
    const std::string where = field("utilities", i);
    std::visit(overloaded{
                   [&](const QuasiLinearTable& u) {
                     for (std::size_t k = 0; k < u.values.size(); ++k) {
                       if (u.values[k].sign() < 0) {
                         throw ConfigError(field(where + ".values", k) + ": v(k) must be >= v(0) = 0");
                       }
                     }
                   },
                   [&](const SirQuasiLinear& u) {
                     if (u.weights.size() != num_bands) throw ConfigError(where + ".weights: need one per band");
                     for (std::size_t b = 0; b < u.weights.size(); ++b) {
                       if (!std::isfinite(u.weights[b]) || u.weights[b] < 0.0) {
                         throw ConfigError(field(where + ".weights", b) + ": must be finite and >= 0");
                       }
                     }
                   },
                   [&](const NonQuasiLinear& u) {
                     if (u.beta.sign() <= 0) throw ConfigError(where + ".beta: must be positive");
                     for (std::size_t k = 0; k < u.values.size(); ++k) {
                       if (u.values[k].sign() < 0) {
                         throw ConfigError(field(where + ".values", k) + ": v(k) must be >= v(0) = 0");
                       }
                     }
                   },
               },
               utilities[i]);
  }
}

std::vector<PowerBundle> enumerate_bundles(std::span<const Rational> quant_levels, std::size_t num_bands,
                                           const Rational& power_budget) {
  if (quant_levels.empty()) throw ConfigError("quant_levels: empty quantization set");
  if (num_bands == 0) throw ConfigError("num_bands: must be positive");

  std::vector<PowerBundle> out;
  std::vector<std::size_t> digit(num_bands, 0);
  std::vector<Rational> prefix(num_bands + 1, Rational{0});  // prefix[b] = sum of bands < b
  PowerBundle current{std::vector<Rational>(num_bands, quant_levels.front())};
  for (BandId b = 0; b < num_bands; ++b) prefix[b + 1] = prefix[b] + current.powers[b];

  // Odometer over Q^f, last band fastest. Levels ascend, so once a band
  // breaks the budget every larger level at that band does too.
  while (true) {
    if (prefix[num_bands] <= power_budget) out.push_back(current);
    std::size_t b = num_bands;
    while (b > 0) {
      --b;
      if (digit[b] + 1 < quant_levels.size() && prefix[b] + quant_levels[digit[b] + 1] <= power_budget) {
        ++digit[b];
        break;
      }
      digit[b] = 0;
      if (b == 0) return out;
    }
    for (BandId c = b; c < num_bands; ++c) {
      current.powers[c] = quant_levels[digit[c]];
      prefix[c + 1] = prefix[c] + current.powers[c];
    }
  }
}

ProfileCatalog::ProfileCatalog(std::size_t num_users, std::vector<PowerBundle> bundles)
    : num_users_(num_users), bundles_(std::move(bundles)), place_(num_users, 1) {
  if (bundles_.empty()) throw ConfigError("catalog: no feasible bundles");
  if (num_users == 0) throw ConfigError("catalog: no users");
  if (!std::is_sorted(bundles_.begin(), bundles_.end()) ||
      std::adjacent_find(bundles_.begin(), bundles_.end()) != bundles_.end()) {
    throw ConfigError("catalog: bundles must be strictly increasing in canonical order");
  }
  const auto base = static_cast<__int128>(bundles_.size());
  __int128 total = 1;
  bool overflow = false;
  for (std::size_t u = 0; u < num_users; ++u) {
    if (total > static_cast<__int128>(kMaxCatalogSize)) {
      overflow = true;
      break;
    }
    total *= base;
  }
  if (overflow || total > static_cast<__int128>(kMaxCatalogSize)) {
    std::string need = overflow ? std::string("more than 2^127")
                                : std::to_string(static_cast<long long>(total));
    throw ConfigError("catalog: G_N = " + std::to_string(bundles_.size()) + "^" + std::to_string(num_users) +
                      " = " + need + " exceeds the supported index bound " + std::to_string(kMaxCatalogSize));
  }
  size_ = static_cast<ProfileIndex>(total);
  for (std::size_t u = num_users; u-- > 1;) {
    place_[u - 1] = place_[u] * static_cast<ProfileIndex>(bundles_.size());
  }
}

std::size_t ProfileCatalog::num_bands() const noexcept { return bundles_.front().powers.size(); }

std::vector<std::size_t> ProfileCatalog::profile_of(ProfileIndex k) const {
  if (!contains(k)) throw DomainError("profile index " + std::to_string(k) + " outside 1.." + std::to_string(size_));
  std::vector<std::size_t> out(num_users_);
  ProfileIndex rest = k - 1;
  for (UserId u = 0; u < num_users_; ++u) {
    out[u] = static_cast<std::size_t>(rest / place_[u]);
    rest %= place_[u];
  }
  return out;
}

std::size_t ProfileCatalog::bundle_index(ProfileIndex k, UserId user) const {
  if (!contains(k)) throw DomainError("profile index " + std::to_string(k) + " outside 1.." + std::to_string(size_));
  if (user >= num_users_) throw DomainError("user id out of range");
  return static_cast<std::size_t>(((k - 1) / place_[user]) % static_cast<ProfileIndex>(bundles_.size()));
}

const Rational& ProfileCatalog::power(ProfileIndex k, UserId user, BandId band) const {
  return bundles_[bundle_index(k, user)].powers.at(band);
}

ProfileIndex ProfileCatalog::index_of(std::span<const std::size_t> bundle_indices) const {
  if (bundle_indices.size() != num_users_) throw DomainError("profile has wrong number of users");
  ProfileIndex k = 0;
  for (UserId u = 0; u < num_users_; ++u) {
    if (bundle_indices[u] >= bundles_.size()) throw DomainError("bundle index out of range");
    k += static_cast<ProfileIndex>(bundle_indices[u]) * place_[u];
  }
  return k + 1;
}

ProfileIndex ProfileCatalog::index_of(std::span<const PowerBundle> profile) const {
  std::vector<std::size_t> idx(profile.size());
  for (std::size_t u = 0; u < profile.size(); ++u) {
    const auto it = std::lower_bound(bundles_.begin(), bundles_.end(), profile[u]);
    if (it == bundles_.end() || !(*it == profile[u])) throw DomainError("bundle is not feasible");
    idx[u] = static_cast<std::size_t>(it - bundles_.begin());
  }
  return index_of(idx);
}

ProfileCatalog build_catalog(std::size_t num_users, std::vector<PowerBundle> bundles) {
  return ProfileCatalog(num_users, std::move(bundles));
}

Rational sir_exact(ProfileIndex k, UserId user, BandId band, const ScenarioConfig& config,
                   const ProfileCatalog& catalog) {
  if (!catalog.contains(k)) throw DomainError("SIR undefined for allocation " + std::to_string(k));
  const Rational signal = config.gains.at(user, user, band) * catalog.power(k, user, band);
  if (signal.is_zero()) return Rational{0};
  Rational interference = config.noise_half_density;
  for (UserId j = 0; j < config.num_users; ++j) {
    if (j == user) continue;
    interference += config.gains.at(j, user, band) * catalog.power(k, j, band);
  }
  return signal / interference;
}

double sir(ProfileIndex k, UserId user, BandId band, const ScenarioConfig& config, const ProfileCatalog& catalog) {
  return sir_exact(k, user, band, config, catalog).to_double();
}

int compare_utility(const UtilityValue& a, const UtilityValue& b, double tolerance) {
  if (a.exact && b.exact) {
    const auto c = *a.exact <=> *b.exact;
    return (c > 0) - (c < 0);
  }
  const double scale = std::max({1.0, std::abs(a.approx), std::abs(b.approx)});
  const double diff = a.approx - b.approx;
  if (diff > tolerance * scale) return 1;
  if (diff < -tolerance * scale) return -1;
  return 0;
}

UtilityValue base_value(const UtilitySpec& spec, ProfileIndex allocation, UserId user, const ScenarioConfig& config,
                        const ProfileCatalog& catalog) {
  if (allocation == kNullAllocation) {
    return std::holds_alternative<SirQuasiLinear>(spec) ? UtilityValue{0.0, std::nullopt}
                                                        : UtilityValue{0.0, Rational{0}};
  }
  if (!catalog.contains(allocation)) throw DomainError("allocation " + std::to_string(allocation) + " outside 0..G_N");
  const auto idx = static_cast<std::size_t>(allocation - 1);
  return std::visit(overloaded{
                        [&](const QuasiLinearTable& u) {
                          const Rational& v = u.values.at(idx);
                          return UtilityValue{v.to_double(), v};
                        },
                        [&](const SirQuasiLinear& u) {
                          double total = 0.0;
                          for (BandId b = 0; b < config.num_bands; ++b) {
                            if (u.weights[b] == 0.0) continue;
                            total += u.weights[b] * std::log1p(sir(allocation, user, b, config, catalog));
                          }
                          return UtilityValue{total, std::nullopt};
                        },
                        [&](const NonQuasiLinear& u) {
                          const Rational& v = u.values.at(idx);
                          return UtilityValue{v.to_double(), v};
                        },
                    },
                    spec);
}

UtilityValue utility_eval(const UtilitySpec& spec, ProfileIndex allocation, const Rational& tax, UserId user,
                          const ScenarioConfig& config, const ProfileCatalog& catalog) {
  const UtilityValue v = base_value(spec, allocation, user, config, catalog);
  return std::visit(overloaded{
                        [&](const QuasiLinearTable&) { return UtilityValue{v.approx - tax.to_double(), *v.exact - tax}; },
                        [&](const SirQuasiLinear&) { return UtilityValue{v.approx - tax.to_double(), std::nullopt}; },
                        [&](const NonQuasiLinear& u) {
                          return UtilityValue{v.approx - u.beta.to_double() * cubic(tax.to_double()), std::nullopt};
                        },
                    },
                    spec);
}

Scenario::Scenario(ScenarioConfig config)
    : config_((config.validate(), std::move(config))),
      catalog_(config_.num_users,
               enumerate_bundles(config_.quant_levels, config_.num_bands, config_.power_budget)) {
  const auto g_n = static_cast<std::size_t>(catalog_.size());
  for (std::size_t i = 0; i < config_.num_users; ++i) {
    const auto check_len = [&](const std::vector<Rational>& values) {
      if (values.size() != g_n) {
        throw ConfigError(field("utilities", i) + ".values: need G_N = " + std::to_string(g_n) + " entries, got " +
                          std::to_string(values.size()));
      }
    };
    if (const auto* t = std::get_if<QuasiLinearTable>(&config_.utilities[i])) check_len(t->values);
    if (const auto* t = std::get_if<NonQuasiLinear>(&config_.utilities[i])) check_len(t->values);
  }
  approx_.assign(config_.num_users, std::vector<double>(g_n + 1, 0.0));
  for (UserId i = 0; i < config_.num_users; ++i) {
    for (ProfileIndex k = 1; k <= catalog_.size(); ++k) {
      approx_[i][static_cast<std::size_t>(k)] = base_value(config_.utilities[i], k, i, config_, catalog_).approx;
    }
  }
}

UtilityValue Scenario::value(UserId user, ProfileIndex allocation) const {
  const auto& spec = config_.utilities.at(user);
  if (allocation != kNullAllocation && !catalog_.contains(allocation)) {
    throw DomainError("allocation " + std::to_string(allocation) + " outside 0..G_N");
  }
  const double approx = approx_[user][static_cast<std::size_t>(allocation)];
  if (allocation == kNullAllocation) {
    return std::holds_alternative<SirQuasiLinear>(spec) ? UtilityValue{0.0, std::nullopt}
                                                        : UtilityValue{0.0, Rational{0}};
  }
  const auto idx = static_cast<std::size_t>(allocation - 1);
  if (const auto* t = std::get_if<QuasiLinearTable>(&spec)) return {approx, t->values[idx]};
  if (const auto* t = std::get_if<NonQuasiLinear>(&spec)) return {approx, t->values[idx]};
  return {approx, std::nullopt};
}

UtilityValue Scenario::utility(UserId user, ProfileIndex allocation, const Rational& tax) const {
  const auto& spec = config_.utilities.at(user);
  const UtilityValue v = value(user, allocation);
  if (std::holds_alternative<QuasiLinearTable>(spec)) return {v.approx - tax.to_double(), *v.exact - tax};
  if (const auto* u = std::get_if<NonQuasiLinear>(&spec)) {
    return {v.approx - u->beta.to_double() * cubic(tax.to_double()), std::nullopt};
  }
  return {v.approx - tax.to_double(), std::nullopt};
}

}  // namespace psm
