#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "psm/equilibrium.hpp"
#include "psm/measurement.hpp"
#include "psm/model.hpp"

namespace psm::io {

struct GridSpec {
  Rational pi_step{1, 4};
  Rational pi_max{2};
};

struct MeasurementSpec {
  Rational pilot_power{1};
  std::vector<AgentBehavior> behaviors;  // empty: everyone honest
};

/// Parsed scenario file. Top-level keys, all required except `grid`,
/// `measurement` and `seed`:
///
///   num_users, num_bands, quant_levels, power_budget, noise_half_density,
///   gains[tx][rx][band], utilities[], grid{pi_step, pi_max},
///   measurement{pilot_power, behaviors[]}, seed
///
/// Exact quantities accept JSON integers, "p/q" strings, or decimals.
/// Unknown keys anywhere are rejected.
struct ScenarioFile {
  ScenarioConfig config;
  GridSpec grid;
  MeasurementSpec measurement;
  std::uint64_t seed = 0;
  std::string digest;  // FNV-1a of the file bytes, hex

  [[nodiscard]] std::vector<AgentBehavior> behaviors() const;
};

/// Throws ConfigError whose message starts with the offending field path.
ScenarioFile parse_scenario(const nlohmann::json& doc);
ScenarioFile parse_scenario_text(std::string_view text);
ScenarioFile load_scenario(const std::filesystem::path& path);

nlohmann::json to_json(const ScenarioConfig& config, const GridSpec& grid, const MeasurementSpec& measurement,
                       std::uint64_t seed);

Rational parse_rational(const nlohmann::json& value, const std::string& where);

/// "n:pi,n:pi,..." (pi as "p/q" or decimal), or a JSON array of {"n", "pi"}.
MessageProfile parse_messages(std::string_view text);
MessageProfile parse_messages(const nlohmann::json& doc);

/// {"allocation": k, "prices": [...], "taxes": [...]}; taxes default to k * L_i.
LindahlAllocation parse_lindahl(const nlohmann::json& doc);

std::string fnv1a_hex(std::string_view bytes);

/// 12 significant digits.
double round12(double value);

nlohmann::json to_json(const Rational& r);
nlohmann::json to_json(const UtilityValue& v);
nlohmann::json to_json(const MessageProfile& profile);
nlohmann::json to_json(const Outcome& outcome);
nlohmann::json to_json(const NashCheck& check);
nlohmann::json to_json(const LindahlCheck& check);
nlohmann::json to_json(const EquilibriumReport& report);
nlohmann::json to_json(const BrResult& result);
nlohmann::json to_json(const MeasurementResult& result);
nlohmann::json to_json(const GainTensor& gains);

/// One row per report: candidate, allocation, taxes and every property flag.
std::string equilibria_csv(const std::vector<EquilibriumReport>& reports);

std::string format_messages(const MessageProfile& profile);

}  // namespace psm::io
