#include "psm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "psm/errors.hpp"

namespace psm::io {

using nlohmann::json;

namespace {

std::string at(const std::string& where, std::size_t i) { return where + "[" + std::to_string(i) + "]"; }
std::string dot(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> allowed,
                std::initializer_list<std::string_view> required) {
  if (!obj.is_object()) throw ConfigError((where.empty() ? std::string("scenario") : where) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(dot(where, key) + ": unknown key");
    }
  }
  for (const auto key : required) {
    if (!obj.contains(key)) throw ConfigError(dot(where, std::string(key)) + ": missing required key");
  }
}

const json& array_at(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(dot(where, key) + ": expected an array");
  return v;
}

std::uint64_t parse_count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(where + ": expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<Rational> parse_rationals(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<Rational> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parse_rational(arr[i], at(where, i)));
  return out;
}

std::set<UserId> parse_partners(const json& obj, const std::string& where, std::size_t users) {
  std::set<UserId> out;
  if (!obj.contains("partners")) return out;
  const json& arr = obj.at("partners");
  if (!arr.is_array()) throw ConfigError(dot(where, "partners") + ": expected an array of 1-based user ids");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto id = parse_count(arr[i], at(dot(where, "partners"), i));
    if (id < 1 || id > users) throw ConfigError(at(dot(where, "partners"), i) + ": user id out of range");
    out.insert(static_cast<UserId>(id - 1));
  }
  return out;
}

UtilitySpec parse_utility(const json& obj, const std::string& where) {
  if (!obj.is_object() || !obj.contains("type") || !obj.at("type").is_string()) {
    throw ConfigError(where + ".type: missing utility type");
  }
  const auto type = obj.at("type").get<std::string>();
  if (type == "quasi_linear_table") {
    check_keys(obj, where, {"type", "values"}, {"values"});
    return QuasiLinearTable{parse_rationals(obj.at("values"), dot(where, "values"))};
  }
  if (type == "sir_quasi_linear") {
    check_keys(obj, where, {"type", "weights"}, {"weights"});
    const json& w = array_at(obj, "weights", where);
    SirQuasiLinear out;
    for (std::size_t b = 0; b < w.size(); ++b) {
      if (!w[b].is_number()) throw ConfigError(at(dot(where, "weights"), b) + ": expected a number");
      out.weights.push_back(w[b].get<double>());
    }
    return out;
  }
  if (type == "non_quasi_linear") {
    check_keys(obj, where, {"type", "values", "beta"}, {"values", "beta"});
    return NonQuasiLinear{parse_rationals(obj.at("values"), dot(where, "values")),
                          parse_rational(obj.at("beta"), dot(where, "beta"))};
  }
  throw ConfigError(where + ".type: unknown utility type '" + type + "'");
}

AgentBehavior parse_behavior(const json& obj, const std::string& where, std::size_t users) {
  if (!obj.is_object() || !obj.contains("type") || !obj.at("type").is_string()) {
    throw ConfigError(where + ".type: missing behavior type");
  }
  const auto type = obj.at("type").get<std::string>();
  if (type == "honest") {
    check_keys(obj, where, {"type"}, {});
    return Honest{};
  }
  if (type == "pilot_cheat") {
    check_keys(obj, where, {"type", "scale", "partners"}, {"scale"});
    return PilotCheat{parse_rationals(obj.at("scale"), dot(where, "scale")), parse_partners(obj, where, users)};
  }
  if (type == "report_cheat") {
    check_keys(obj, where, {"type", "factor", "offset", "partners"}, {});
    ReportCheat out;
    if (obj.contains("factor")) out.factor = parse_rationals(obj.at("factor"), dot(where, "factor"));
    if (obj.contains("offset")) out.offset = parse_rationals(obj.at("offset"), dot(where, "offset"));
    if (out.factor.empty() && out.offset.empty()) {
      throw ConfigError(where + ": report_cheat needs factor and/or offset");
    }
    // A missing side is the identity.
    if (out.factor.empty()) out.factor.assign(out.offset.size(), Rational{1});
    if (out.offset.empty()) out.offset.assign(out.factor.size(), Rational{0});
    out.partners = parse_partners(obj, where, users);
    return out;
  }
  throw ConfigError(where + ".type: unknown behavior type '" + type + "'");
}

json behavior_json(const AgentBehavior& b) {
  const auto partners = [](const std::set<UserId>& p) {
    json arr = json::array();
    for (const UserId u : p) arr.push_back(u + 1);
    return arr;
  };
  const auto rationals = [](const std::vector<Rational>& v) {
    json arr = json::array();
    for (const auto& r : v) arr.push_back(r.str());
    return arr;
  };
  if (std::holds_alternative<Honest>(b)) return json{{"type", "honest"}};
  if (const auto* p = std::get_if<PilotCheat>(&b)) {
    json out{{"type", "pilot_cheat"}, {"scale", rationals(p->scale)}};
    if (!p->partners.empty()) out["partners"] = partners(p->partners);
    return out;
  }
  const auto& r = std::get<ReportCheat>(b);
  json out{{"type", "report_cheat"}, {"factor", rationals(r.factor)}, {"offset", rationals(r.offset)}};
  if (!r.partners.empty()) out["partners"] = partners(r.partners);
  return out;
}

}  // namespace

Rational parse_rational(const json& value, const std::string& where) {
  try {
    if (value.is_number_integer()) return Rational{value.get<std::int64_t>()};
    if (value.is_number_float()) return Rational::from_double(value.get<double>());
    if (value.is_string()) return Rational::parse(value.get<std::string>());
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const OverflowError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": expected a number or a \"p/q\" string");
}

std::vector<AgentBehavior> ScenarioFile::behaviors() const {
  if (!measurement.behaviors.empty()) return measurement.behaviors;
  return std::vector<AgentBehavior>(config.num_users, Honest{});
}

ScenarioFile parse_scenario(const json& doc) {
  check_keys(doc, "",
             {"num_users", "num_bands", "quant_levels", "power_budget", "noise_half_density", "gains", "utilities",
              "grid", "measurement", "seed"},
             {"num_users", "num_bands", "quant_levels", "power_budget", "noise_half_density", "gains", "utilities"});
  ScenarioFile out;
  ScenarioConfig& c = out.config;
  c.num_users = static_cast<std::size_t>(parse_count(doc.at("num_users"), "num_users"));
  c.num_bands = static_cast<std::size_t>(parse_count(doc.at("num_bands"), "num_bands"));
  c.quant_levels = parse_rationals(doc.at("quant_levels"), "quant_levels");
  c.power_budget = parse_rational(doc.at("power_budget"), "power_budget");
  c.noise_half_density = parse_rational(doc.at("noise_half_density"), "noise_half_density");

  const json& gains = array_at(doc, "gains", "");
  if (gains.size() != c.num_users) throw ConfigError("gains: expected num_users transmitter rows");
  c.gains = GainTensor(c.num_users, c.num_bands);
  for (std::size_t tx = 0; tx < c.num_users; ++tx) {
    const std::string wtx = at("gains", tx);
    if (!gains[tx].is_array() || gains[tx].size() != c.num_users) throw ConfigError(wtx + ": expected num_users receivers");
    for (std::size_t rx = 0; rx < c.num_users; ++rx) {
      const std::string wrx = at(wtx, rx);
      const json& bands = gains[tx][rx];
      if (!bands.is_array() || bands.size() != c.num_bands) throw ConfigError(wrx + ": expected num_bands gains");
      for (std::size_t b = 0; b < c.num_bands; ++b) c.gains.at(tx, rx, b) = parse_rational(bands[b], at(wrx, b));
    }
  }

  const json& utilities = array_at(doc, "utilities", "");
  for (std::size_t i = 0; i < utilities.size(); ++i) c.utilities.push_back(parse_utility(utilities[i], at("utilities", i)));

  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    check_keys(g, "grid", {"pi_step", "pi_max"}, {"pi_step", "pi_max"});
    out.grid.pi_step = parse_rational(g.at("pi_step"), "grid.pi_step");
    out.grid.pi_max = parse_rational(g.at("pi_max"), "grid.pi_max");
    if (out.grid.pi_step.sign() <= 0) throw ConfigError("grid.pi_step: must be positive");
    if (out.grid.pi_max.sign() < 0) throw ConfigError("grid.pi_max: must be non-negative");
  }
  if (doc.contains("measurement")) {
    const json& m = doc.at("measurement");
    check_keys(m, "measurement", {"pilot_power", "behaviors"}, {});
    if (m.contains("pilot_power")) {
      out.measurement.pilot_power = parse_rational(m.at("pilot_power"), "measurement.pilot_power");
      if (out.measurement.pilot_power.sign() <= 0) throw ConfigError("measurement.pilot_power: must be positive");
    }
    if (m.contains("behaviors")) {
      const json& b = array_at(m, "behaviors", "measurement");
      if (b.size() != c.num_users) throw ConfigError("measurement.behaviors: need one entry per user");
      for (std::size_t i = 0; i < b.size(); ++i) {
        out.measurement.behaviors.push_back(parse_behavior(b[i], at("measurement.behaviors", i), c.num_users));
      }
    }
  }
  if (doc.contains("seed")) out.seed = parse_count(doc.at("seed"), "seed");
  c.validate();
  return out;
}

ScenarioFile parse_scenario_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario: not valid JSON: ") + e.what());
  }
  ScenarioFile out = parse_scenario(doc);
  out.digest = fnv1a_hex(text);
  return out;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("scenario: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

json to_json(const ScenarioConfig& config, const GridSpec& grid, const MeasurementSpec& measurement,
             std::uint64_t seed) {
  json doc;
  doc["num_users"] = config.num_users;
  doc["num_bands"] = config.num_bands;
  doc["quant_levels"] = json::array();
  for (const auto& q : config.quant_levels) doc["quant_levels"].push_back(q.str());
  doc["power_budget"] = config.power_budget.str();
  doc["noise_half_density"] = config.noise_half_density.str();
  doc["gains"] = to_json(config.gains);
  doc["utilities"] = json::array();
  for (const auto& u : config.utilities) {
    if (const auto* t = std::get_if<QuasiLinearTable>(&u)) {
      json values = json::array();
      for (const auto& v : t->values) values.push_back(v.str());
      doc["utilities"].push_back({{"type", "quasi_linear_table"}, {"values", values}});
    } else if (const auto* t = std::get_if<SirQuasiLinear>(&u)) {
      doc["utilities"].push_back({{"type", "sir_quasi_linear"}, {"weights", t->weights}});
    } else {
      const auto& n = std::get<NonQuasiLinear>(u);
      json values = json::array();
      for (const auto& v : n.values) values.push_back(v.str());
      doc["utilities"].push_back({{"type", "non_quasi_linear"}, {"values", values}, {"beta", n.beta.str()}});
    }
  }
  doc["grid"] = {{"pi_step", grid.pi_step.str()}, {"pi_max", grid.pi_max.str()}};
  json behaviors = json::array();
  for (const auto& b : measurement.behaviors) behaviors.push_back(behavior_json(b));
  doc["measurement"] = {{"pilot_power", measurement.pilot_power.str()}};
  if (!measurement.behaviors.empty()) doc["measurement"]["behaviors"] = behaviors;
  doc["seed"] = seed;
  return doc;
}

MessageProfile parse_messages(std::string_view text) {
  std::vector<Message> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view item = text.substr(start, comma - start);
    const std::size_t colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("messages: expected n:pi, got '" + std::string(item) + "'");
    }
    std::int64_t n = 0;
    const auto lhs = item.substr(0, colon);
    auto [p, ec] = std::from_chars(lhs.data(), lhs.data() + lhs.size(), n);
    if (ec != std::errc{} || p != lhs.data() + lhs.size()) {
      throw ConfigError("messages: bad profile index '" + std::string(lhs) + "'");
    }
    const Rational pi = Rational::parse(item.substr(colon + 1));
    if (pi.sign() < 0) throw ConfigError("messages: price must be non-negative");
    out.push_back({n, pi});
    start = comma + 1;
  }
  return MessageProfile(std::move(out));
}

MessageProfile parse_messages(const json& doc) {
  if (!doc.is_array() || doc.empty()) throw ConfigError("messages: expected a non-empty array");
  std::vector<Message> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = at("messages", i);
    check_keys(doc[i], where, {"n", "pi"}, {"n", "pi"});
    if (!doc[i].at("n").is_number_integer()) throw ConfigError(where + ".n: expected an integer");
    const Rational pi = parse_rational(doc[i].at("pi"), where + ".pi");
    if (pi.sign() < 0) throw ConfigError(where + ".pi: must be non-negative");
    out.push_back({doc[i].at("n").get<std::int64_t>(), pi});
  }
  return MessageProfile(std::move(out));
}

LindahlAllocation parse_lindahl(const json& doc) {
  check_keys(doc, "psi", {"allocation", "prices", "taxes"}, {"allocation", "prices"});
  if (!doc.at("allocation").is_number_integer()) throw ConfigError("psi.allocation: expected an integer");
  LindahlAllocation psi;
  psi.allocation = doc.at("allocation").get<std::int64_t>();
  psi.prices = parse_rationals(doc.at("prices"), "psi.prices");
  if (doc.contains("taxes")) {
    psi.taxes = parse_rationals(doc.at("taxes"), "psi.taxes");
    if (psi.taxes.size() != psi.prices.size()) throw ConfigError("psi.taxes: need one per user");
  } else {
    for (const auto& p : psi.prices) psi.taxes.push_back(Rational{psi.allocation} * p);
  }
  return psi;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double round12(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", value);
  return std::strtod(buf, nullptr);
}

json to_json(const Rational& r) { return r.str(); }

json to_json(const UtilityValue& v) {
  json out{{"value", round12(v.approx)}};
  if (v.exact) out["exact"] = v.exact->str();
  return out;
}

json to_json(const MessageProfile& profile) {
  json out = json::array();
  for (const auto& m : profile.messages()) out.push_back({{"n", m.n}, {"pi", m.pi.str()}});
  return out;
}

json to_json(const Outcome& outcome) {
  json taxes = json::array();
  Rational sum{0};
  for (const auto& t : outcome.taxes) {
    taxes.push_back(t.str());
    sum += t;
  }
  return {{"allocation", outcome.allocation}, {"taxes", taxes}, {"budget_sum", sum.str()}};
}

json to_json(const NashCheck& check) {
  json out{{"is_ne_on_grid", check.is_ne}, {"deviations_checked", check.deviations_checked}};
  if (check.best_deviation) {
    const auto& d = *check.best_deviation;
    out["best_deviation"] = {{"user", d.user + 1},
                             {"n", d.message.n},
                             {"pi", d.message.pi.str()},
                             {"current", to_json(d.current)},
                             {"deviated", to_json(d.deviated)},
                             {"gain", round12(d.gain())}};
    if (const auto g = d.exact_gain()) out["best_deviation"]["exact_gain"] = g->str();
  }
  return out;
}

json to_json(const LindahlCheck& check) {
  json prices = json::array();
  json taxes = json::array();
  for (const auto& p : check.psi.prices) prices.push_back(p.str());
  for (const auto& t : check.psi.taxes) taxes.push_back(t.str());
  json out{{"allocation", check.psi.allocation},
           {"taxes", taxes},
           {"prices", prices},
           {"c1", check.c1},
           {"c2", check.c2},
           {"budget_line", check.budget_line},
           {"c3", check.c3},
           {"c3_sign_constrained", check.c3_sign_constrained}};
  if (check.c3_violation) {
    const auto& w = *check.c3_violation;
    out["c3_violation"] = {{"user", w.user + 1},
                           {"alternative", w.alternative},
                           {"at_allocation", to_json(w.at_allocation)},
                           {"at_alternative", to_json(w.at_alternative)}};
  }
  return out;
}

json to_json(const EquilibriumReport& report) {
  json ir = json::array();
  for (const bool b : report.individually_rational) ir.push_back(b);
  json out{{"candidate", to_json(report.candidate)},
           {"outcome", to_json(report.outcome)},
           {"nash", to_json(report.nash)},
           {"lemma1", report.lemma1},
           {"feasible", report.feasible},
           {"individually_rational", ir},
           {"tax_form_matches", report.tax_form_matches},
           {"chain_holds", report.chain_holds()}};
  if (report.lindahl) out["lindahl"] = to_json(*report.lindahl);
  return out;
}

json to_json(const BrResult& result) {
  json log = json::array();
  for (const auto& s : result.log) {
    log.push_back({{"round", s.round},
                   {"user", s.user + 1},
                   {"from", {{"n", s.from.n}, {"pi", s.from.pi.str()}}},
                   {"to", {{"n", s.to.n}, {"pi", s.to.pi.str()}}}});
  }
  json out{{"converged", result.converged},
           {"rounds", result.rounds},
           {"start", to_json(result.start)},
           {"final", to_json(result.final_profile)},
           {"log", log}};
  if (result.fixed_point_check) out["fixed_point_check"] = to_json(*result.fixed_point_check);
  return out;
}

json to_json(const GainTensor& gains) {
  json out = json::array();
  for (UserId tx = 0; tx < gains.num_users(); ++tx) {
    json row = json::array();
    for (UserId rx = 0; rx < gains.num_users(); ++rx) {
      json bands = json::array();
      for (BandId b = 0; b < gains.num_bands(); ++b) bands.push_back(gains.at(tx, rx, b).str());
      row.push_back(bands);
    }
    out.push_back(row);
  }
  return out;
}

json to_json(const MeasurementResult& result) {
  json excluded = json::array();
  for (const UserId u : result.excluded) excluded.push_back(u + 1);
  json log = json::array();
  for (const auto& r : result.log) {
    log.push_back({{"transmitter", r.transmitter + 1},
                   {"receiver", r.receiver + 1},
                   {"band", r.band + 1},
                   {"reported_by_tx", r.reported_by_tx.str()},
                   {"reported_by_rx", r.reported_by_rx.str()},
                   {"match", r.reported_by_tx == r.reported_by_rx}});
  }
  return {{"estimated_gains", to_json(result.estimated)}, {"excluded", excluded}, {"log", log}};
}

std::string format_messages(const MessageProfile& profile) {
  std::string out;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(profile[i].n) + ":" + profile[i].pi.str();
  }
  return out;
}

std::string equilibria_csv(const std::vector<EquilibriumReport>& reports) {
  std::ostringstream os;
  os << "messages,allocation,taxes,is_ne_on_grid,lemma1,feasible,individually_rational,tax_form_matches,c1,c2,c3,"
        "c3_sign_constrained,chain_holds\n";
  for (const auto& r : reports) {
    std::string taxes;
    for (std::size_t i = 0; i < r.outcome.taxes.size(); ++i) taxes += (i ? ";" : "") + r.outcome.taxes[i].str();
    const bool ir = std::all_of(r.individually_rational.begin(), r.individually_rational.end(), [](bool b) { return b; });
    const auto flag = [](bool b) { return b ? "1" : "0"; };
    os << '"' << format_messages(r.candidate) << "\"," << r.outcome.allocation << ",\"" << taxes << "\","
       << flag(r.is_ne()) << ',' << flag(r.lemma1) << ',' << flag(r.feasible) << ',' << flag(ir) << ','
       << flag(r.tax_form_matches) << ',';
    if (r.lindahl) {
      os << flag(r.lindahl->c1) << ',' << flag(r.lindahl->c2) << ',' << flag(r.lindahl->c3) << ','
         << flag(r.lindahl->c3_sign_constrained);
    } else {
      os << ",,,";
    }
    os << ',' << flag(r.chain_holds()) << '\n';
  }
  return os.str();
}

}  // namespace psm::io
