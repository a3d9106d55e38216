#include "psm/measurement.hpp"

#include <algorithm>
#include <string>

#include "psm/errors.hpp"

namespace psm {
namespace {

bool targets(const std::set<UserId>& partners, UserId partner) {
  return partners.empty() || partners.contains(partner);
}

Rational pilot_sent(const AgentBehavior& behavior, const Rational& pilot, UserId partner, BandId band) {
  if (const auto* cheat = std::get_if<PilotCheat>(&behavior); cheat && targets(cheat->partners, partner)) {
    return pilot * cheat->scale.at(band);
  }
  return pilot;
}

Rational reported(const AgentBehavior& behavior, const Rational& received, UserId partner, BandId band) {
  if (const auto* cheat = std::get_if<ReportCheat>(&behavior); cheat && targets(cheat->partners, partner)) {
    return received * cheat->factor.at(band) + cheat->offset.at(band);
  }
  return received;
}

void check_behavior(const AgentBehavior& behavior, std::size_t num_bands, std::size_t user) {
  const std::string where = "measurement.behaviors[" + std::to_string(user) + "]";
  if (const auto* p = std::get_if<PilotCheat>(&behavior)) {
    if (p->scale.size() != num_bands) throw ConfigError(where + ".scale: need one entry per band");
    for (const auto& s : p->scale) {
      if (s.sign() < 0) throw ConfigError(where + ".scale: pilot scale must be non-negative");
    }
  }
  if (const auto* r = std::get_if<ReportCheat>(&behavior)) {
    if (r->factor.size() != num_bands || r->offset.size() != num_bands) {
      throw ConfigError(where + ": factor and offset need one entry per band");
    }
  }
}

}  // namespace

MeasurementResult run_measurement(const GainTensor& true_gains, const std::vector<AgentBehavior>& behaviors,
                                  const Rational& pilot_power, const Rational& tolerance) {
  if (pilot_power.sign() <= 0) throw ConfigError("measurement.pilot_power: must be positive");
  if (tolerance.sign() < 0) throw ConfigError("measurement tolerance must be non-negative");
  const std::size_t users = true_gains.num_users();
  const std::size_t bands = true_gains.num_bands();
  if (behaviors.size() != users) throw ConfigError("measurement.behaviors: need one entry per user");
  for (std::size_t u = 0; u < users; ++u) check_behavior(behaviors[u], bands, u);

  MeasurementResult out;
  out.estimated = GainTensor(users, bands);

  for (UserId i = 0; i < users; ++i) {
    for (UserId j = 0; j < users; ++j) {
      for (BandId b = 0; b < bands; ++b) {
        const Rational& gain = true_gains.at(i, j, b);
        if (i == j) {
          // Own link: both ends belong to user i, nothing to compare against.
          const Rational heard = gain * pilot_sent(behaviors[i], pilot_power, i, b);
          out.estimated.at(i, i, b) = reported(behaviors[i], heard, i, b) / pilot_power;
          continue;
        }
        // Transmitter i -> receiver j, then receiver j -> transmitter i over
        // the reciprocal link, then both report.
        const Rational heard_by_rx = gain * pilot_sent(behaviors[i], pilot_power, j, b);
        const Rational heard_by_tx = gain * pilot_sent(behaviors[j], pilot_power, i, b);
        GainReport report{i, j, b, reported(behaviors[i], heard_by_tx, j, b),
                          reported(behaviors[j], heard_by_rx, i, b)};
        out.estimated.at(i, j, b) = report.reported_by_rx / pilot_power;
        Rational gap = report.reported_by_tx - report.reported_by_rx;
        if (gap.sign() < 0) gap = -gap;
        if (gap > tolerance) {
          out.excluded.insert(i);
          out.excluded.insert(j);
        }
        out.log.push_back(std::move(report));
      }
    }
  }
  return out;
}

ScenarioConfig exclusion_consequence(const std::set<UserId>& excluded, const ScenarioConfig& config) {
  if (excluded.empty()) return config;
  std::vector<UserId> keep;
  for (UserId u = 0; u < config.num_users; ++u) {
    if (!excluded.contains(u)) keep.push_back(u);
  }
  if (keep.size() < kMinUsers) {
    throw ConfigError("exclusion leaves " + std::to_string(keep.size()) + " users; the game needs at least " +
                      std::to_string(kMinUsers));
  }

  ScenarioConfig reduced;
  reduced.num_users = keep.size();
  reduced.num_bands = config.num_bands;
  reduced.quant_levels = config.quant_levels;
  reduced.power_budget = config.power_budget;
  reduced.noise_half_density = config.noise_half_density;
  reduced.gains = GainTensor(keep.size(), config.num_bands);
  for (std::size_t a = 0; a < keep.size(); ++a) {
    for (std::size_t c = 0; c < keep.size(); ++c) {
      for (BandId b = 0; b < config.num_bands; ++b) reduced.gains.at(a, c, b) = config.gains.at(keep[a], keep[c], b);
    }
  }

  const bool has_tables = std::any_of(config.utilities.begin(), config.utilities.end(), [](const UtilitySpec& u) {
    return !std::holds_alternative<SirQuasiLinear>(u);
  });
  if (!has_tables) {
    for (const UserId u : keep) reduced.utilities.push_back(config.utilities.at(u));
    return reduced;
  }

  // Excluded users transmit nothing: bundle 0 is the all-zero bundle.
  auto bundles = enumerate_bundles(config.quant_levels, config.num_bands, config.power_budget);
  const ProfileCatalog full(config.num_users, bundles);
  const ProfileCatalog small(keep.size(), std::move(bundles));
  std::vector<ProfileIndex> embed(static_cast<std::size_t>(small.size()));
  std::vector<std::size_t> digits(config.num_users, 0);
  for (ProfileIndex k = 1; k <= small.size(); ++k) {
    const auto part = small.profile_of(k);
    for (std::size_t a = 0; a < keep.size(); ++a) digits[keep[a]] = part[a];
    embed[static_cast<std::size_t>(k - 1)] = full.index_of(digits);
  }
  const auto remap = [&](const std::vector<Rational>& values) {
    std::vector<Rational> out;
    out.reserve(embed.size());
    for (const ProfileIndex k : embed) out.push_back(values.at(static_cast<std::size_t>(k - 1)));
    return out;
  };
  for (const UserId u : keep) {
    const UtilitySpec& spec = config.utilities.at(u);
    if (const auto* t = std::get_if<QuasiLinearTable>(&spec)) {
      reduced.utilities.emplace_back(QuasiLinearTable{remap(t->values)});
    } else if (const auto* t = std::get_if<NonQuasiLinear>(&spec)) {
      reduced.utilities.emplace_back(NonQuasiLinear{remap(t->values), t->beta});
    } else {
      reduced.utilities.push_back(spec);
    }
  }
  return reduced;
}

}  // namespace psm
