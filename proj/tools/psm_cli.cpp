// psm: command-line front end for the power/spectrum sharing mechanism.

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "psm/equilibrium.hpp"
#include "psm/errors.hpp"
#include "psm/io.hpp"
#include "psm/kernels.hpp"
#include "psm/measurement.hpp"

namespace {

using nlohmann::json;
using namespace psm;

enum class Format { Json, Table, Csv };

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  Format format = Format::Table;
  int jobs = 0;
  bool serial = false;
  DeviationSpace space = DeviationSpace::GridAndReach;
};

struct Loaded {
  io::ScenarioFile file;
  Scenario scenario;
  MessageGrid grid;
  std::uint64_t seed;
};

Loaded load(const Common& c) {
  io::ScenarioFile file = io::load_scenario(c.scenario);
  Scenario scenario(file.config);
  MessageGrid grid = MessageGrid::standard(scenario.num_users(), scenario.catalog_size(), file.grid.pi_step,
                                           file.grid.pi_max);
  grid.validate(scenario.num_users(), scenario.catalog_size());
  const std::uint64_t seed = c.seed.value_or(file.seed);
  return {std::move(file), std::move(scenario), std::move(grid), seed};
}

Backend backend_of(const Common& c) { return c.serial ? Backend::Serial : Backend::OpenMP; }

json header(const std::string& command, const Loaded& l) {
  return {{"command", command},
          {"scenario_digest", l.file.digest},
          {"seed", l.seed},
          {"catalog", {{"bundles", l.scenario.catalog().bundles().size()}, {"G_N", l.scenario.catalog_size()}}}};
}

void emit_json(const json& doc) { std::cout << doc.dump(2) << '\n'; }

std::string bundle_str(const PowerBundle& b) {
  std::string out = "(";
  for (std::size_t i = 0; i < b.powers.size(); ++i) out += (i ? "," : "") + b.powers[i].str();
  return out + ")";
}

std::string taxes_str(const std::vector<Rational>& taxes) {
  std::string out;
  for (std::size_t i = 0; i < taxes.size(); ++i) out += (i ? " " : "") + taxes[i].str();
  return out;
}

void require_balanced(const Outcome& o) {
  Rational sum{0};
  for (const auto& t : o.taxes) sum += t;
  if (!sum.is_zero()) throw ContractError("budget sum is " + sum.str() + ", expected 0");
}

MessageProfile read_messages(const std::string& inline_text, const std::string& path) {
  if (!inline_text.empty() && !path.empty()) throw ConfigError("messages: give --messages or --messages-file, not both");
  if (!inline_text.empty()) return io::parse_messages(std::string_view(inline_text));
  if (path.empty()) throw ConfigError("messages: --messages or --messages-file is required");
  std::ifstream in(path);
  if (!in) throw ConfigError("messages: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("messages: not valid JSON: ") + e.what());
  }
  return io::parse_messages(doc);
}

void check_size(const MessageProfile& m, const Scenario& s) {
  if (m.size() != s.num_users()) {
    throw ConfigError("messages: expected " + std::to_string(s.num_users()) + " messages, got " +
                      std::to_string(m.size()));
  }
}

const char* yes(bool b) { return b ? "yes" : "no"; }

void print_report_row(const EquilibriumReport& r) {
  std::cout << "  " << std::left << std::setw(28) << io::format_messages(r.candidate) << " k=" << std::setw(5)
            << r.outcome.allocation << " ne=" << yes(r.is_ne()) << " lemma1=" << yes(r.lemma1)
            << " feasible=" << yes(r.feasible);
  bool ir = true;
  for (const bool b : r.individually_rational) ir = ir && b;
  std::cout << " ir=" << yes(ir) << " tax_form=" << yes(r.tax_form_matches);
  if (r.lindahl) {
    std::cout << " c1=" << yes(r.lindahl->c1) << " c2=" << yes(r.lindahl->c2) << " c3=" << yes(r.lindahl->c3)
              << " c3_signed=" << yes(r.lindahl->c3_sign_constrained);
  }
  std::cout << '\n';
}

int cmd_enumerate(const Common& c, bool table) {
  const io::ScenarioFile file = io::load_scenario(c.scenario);
  const Scenario scenario(file.config);
  const auto& cat = scenario.catalog();
  if (c.format == Format::Json) {
    json doc{{"command", "enumerate"},
             {"scenario_digest", file.digest},
             {"catalog", {{"bundles", cat.bundles().size()}, {"G_N", cat.size()}}}};
    json bundles = json::array();
    for (const auto& b : cat.bundles()) {
      json p = json::array();
      for (const auto& x : b.powers) p.push_back(x.str());
      bundles.push_back(p);
    }
    doc["bundles"] = bundles;
    if (table) {
      json rows = json::array();
      for (ProfileIndex k = 1; k <= cat.size(); ++k) {
        json idx = json::array();
        for (const auto b : cat.profile_of(k)) idx.push_back(b + 1);
        rows.push_back({{"k", k}, {"bundles", idx}});
      }
      doc["profiles"] = rows;
    }
    emit_json(doc);
    return 0;
  }
  if (c.format == Format::Csv) {
    std::cout << "k";
    for (UserId u = 0; u < cat.num_users(); ++u) std::cout << ",user" << u + 1;
    std::cout << '\n';
    for (ProfileIndex k = 1; k <= cat.size(); ++k) {
      std::cout << k;
      for (const auto b : cat.profile_of(k)) std::cout << ",\"" << bundle_str(cat.bundles()[b]) << '"';
      std::cout << '\n';
    }
    return 0;
  }
  std::cout << "bundles=" << cat.bundles().size() << ", G_N=" << cat.size() << '\n';
  if (table) {
    for (std::size_t b = 0; b < cat.bundles().size(); ++b) {
      std::cout << "bundle " << b + 1 << ": " << bundle_str(cat.bundles()[b]) << '\n';
    }
    for (ProfileIndex k = 1; k <= cat.size(); ++k) {
      std::cout << std::setw(8) << k << " :";
      for (const auto b : cat.profile_of(k)) std::cout << ' ' << bundle_str(cat.bundles()[b]);
      std::cout << '\n';
    }
  }
  return 0;
}

int cmd_outcome(const Common& c, const std::string& messages, const std::string& messages_file) {
  const Loaded l = load(c);
  const MessageProfile m = read_messages(messages, messages_file);
  check_size(m, l.scenario);
  const Outcome o = outcome(m, l.scenario.catalog());
  require_balanced(o);
  if (c.format == Format::Json) {
    json doc = header("outcome", l);
    doc["messages"] = io::to_json(m);
    doc["outcome"] = io::to_json(o);
    json prices = json::array();
    for (const auto& p : lindahl_prices(m)) prices.push_back(p.str());
    doc["lindahl_prices"] = prices;
    emit_json(doc);
  } else {
    std::cout << "allocation=" << o.allocation << '\n';
    for (std::size_t i = 0; i < o.taxes.size(); ++i) std::cout << "t" << i + 1 << "=" << o.taxes[i].str() << '\n';
    std::cout << "sum=0\n";
  }
  return 0;
}

int cmd_find_ne(const Common& c, const std::string& method, std::size_t starts, const std::string& price_text,
                std::size_t max_rounds) {
  const Loaded l = load(c);
  const Backend backend = backend_of(c);
  const Rational price = Rational::parse(price_text);
  if (price.sign() < 0) throw ConfigError("--price: must be non-negative");
  const bool run_unanimity = method == "unanimity" || method == "both";
  const bool run_br = method == "br" || method == "both";
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<EquilibriumReport> found;
  std::set<MessageProfile> seen;
  std::size_t unanimity_candidates = 0;
  if (run_unanimity) {
    auto reports = unanimity_scan(l.scenario, l.grid, price, c.space, backend);
    unanimity_candidates = reports.size();
    for (auto& r : reports) {
      require_balanced(r.outcome);
      if (r.is_ne() && seen.insert(r.candidate).second) found.push_back(std::move(r));
    }
  }
  std::vector<BrResult> trajectories;
  std::size_t converged = 0;
  if (run_br) {
    trajectories = br_search(l.scenario, l.grid, starts, l.seed, max_rounds, c.space, backend);
    for (const auto& t : trajectories) {
      if (!t.converged) continue;
      ++converged;
      if (seen.contains(t.final_profile)) continue;
      auto r = analyze_candidate(l.scenario, l.grid, t.final_profile, c.space, backend);
      require_balanced(r.outcome);
      if (r.is_ne()) {
        seen.insert(t.final_profile);
        found.push_back(std::move(r));
      }
    }
  }
  bool chain = true;
  for (const auto& r : found) chain = chain && r.chain_holds();
  if (!chain) throw ContractError("a verified grid NE violates the equilibrium property chain");
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  if (c.format == Format::Csv) {
    std::cout << io::equilibria_csv(found);
    return 0;
  }
  if (c.format == Format::Json) {
    json doc = header("find-ne", l);
    doc["method"] = method;
    doc["deviation_space"] = c.space == DeviationSpace::Grid ? "grid" : "grid_and_reach";
    doc["note"] = "is_ne_on_grid certifies the Nash test over the finite message grid only";
    json eq = json::array();
    for (const auto& r : found) eq.push_back(io::to_json(r));
    doc["equilibria"] = eq;
    if (run_unanimity) doc["unanimity"] = {{"candidates", unanimity_candidates}, {"price", price.str()}};
    if (run_br) {
      json logs = json::array();
      for (const auto& t : trajectories) logs.push_back(io::to_json(t));
      doc["br"] = {{"starts", starts},
                   {"converged", converged},
                   {"convergence_rate", io::round12(starts ? double(converged) / double(starts) : 0.0)},
                   {"max_rounds", max_rounds},
                   {"trajectories", logs}};
    }
    doc["timing_ms"] = io::round12(ms);
    emit_json(doc);
    return 0;
  }
  const auto& cat = l.scenario.catalog();
  std::cout << "bundles=" << cat.bundles().size() << ", G_N=" << cat.size() << ", seed=" << l.seed << '\n';
  if (run_unanimity) std::cout << "unanimity candidates scanned: " << unanimity_candidates << '\n';
  if (run_br) std::cout << "br: " << converged << "/" << starts << " starts reached a fixed point\n";
  std::cout << "grid NE found: " << found.size() << '\n';
  for (const auto& r : found) print_report_row(r);
  std::cout << "time_ms=" << std::fixed << std::setprecision(1) << ms << '\n';
  return 0;
}

int cmd_verify(const Common& c, const std::string& messages, const std::string& messages_file) {
  const Loaded l = load(c);
  const MessageProfile m = read_messages(messages, messages_file);
  check_size(m, l.scenario);
  const auto r = analyze_candidate(l.scenario, l.grid, m, c.space, backend_of(c));
  require_balanced(r.outcome);
  if (c.format == Format::Csv) {
    std::cout << io::equilibria_csv({r});
  } else if (c.format == Format::Json) {
    json doc = header("verify", l);
    doc["report"] = io::to_json(r);
    emit_json(doc);
  } else {
    print_report_row(r);
    if (r.nash.best_deviation) {
      const auto& d = *r.nash.best_deviation;
      std::cout << "  best deviation: user " << d.user + 1 << " -> " << d.message.n << ":" << d.message.pi.str()
                << " gain=" << std::setprecision(12) << d.gain() << '\n';
    }
  }
  return 0;
}

int cmd_roundtrip(const Common& c, const std::string& psi_path, const std::string& pi1_text) {
  const Loaded l = load(c);
  std::ifstream in(psi_path);
  if (!in) throw ConfigError("psi: cannot open " + psi_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("psi: not valid JSON: ") + e.what());
  }
  const LindahlAllocation psi = io::parse_lindahl(doc);
  if (psi.prices.size() != l.scenario.num_users()) throw ConfigError("psi.prices: need one per user");
  const Rational pi1 = Rational::parse(pi1_text);
  const RoundTrip rt = lindahl_roundtrip(l.scenario, l.grid, psi, pi1, c.space, backend_of(c));
  require_balanced(rt.report.outcome);
  if (c.format == Format::Json) {
    json out = header("lindahl-roundtrip", l);
    out["pi1"] = pi1.str();
    out["messages"] = io::to_json(rt.messages);
    out["report"] = io::to_json(rt.report);
    json prices = json::array();
    for (const auto& p : rt.recovered.prices) prices.push_back(p.str());
    json taxes = json::array();
    for (const auto& t : rt.recovered.taxes) taxes.push_back(t.str());
    out["recovered"] = {{"allocation", rt.recovered.allocation}, {"taxes", taxes}, {"prices", prices}};
    out["matches"] = rt.matches;
    emit_json(out);
  } else {
    std::cout << "messages=" << io::format_messages(rt.messages) << '\n';
    print_report_row(rt.report);
    std::cout << "recovered allocation=" << rt.recovered.allocation << " taxes=" << taxes_str(rt.recovered.taxes)
              << " prices=" << taxes_str(rt.recovered.prices) << '\n';
    std::cout << "matches=" << yes(rt.matches) << '\n';
  }
  return 0;
}

int cmd_measure(const Common& c, const std::string& tolerance_text) {
  const Loaded l = load(c);
  const Rational tolerance = Rational::parse(tolerance_text);
  const auto t0 = std::chrono::steady_clock::now();
  const MeasurementResult m = run_measurement(l.file.config.gains, l.file.behaviors(),
                                              l.file.measurement.pilot_power, tolerance);
  const bool exact = m.estimated == l.file.config.gains;
  std::optional<ScenarioConfig> reduced;
  std::string reduced_error;
  try {
    reduced = exclusion_consequence(m.excluded, l.file.config);
  } catch (const ConfigError& e) {
    reduced_error = e.what();
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (c.format == Format::Json) {
    json doc = header("measure", l);
    doc["measurement"] = io::to_json(m);
    doc["estimate_matches_truth"] = exact;
    if (reduced) {
      doc["remaining_users"] = reduced->num_users;
    } else {
      doc["remaining_users"] = l.file.config.num_users - m.excluded.size();
      doc["game_error"] = reduced_error;
    }
    doc["timing_ms"] = io::round12(ms);
    emit_json(doc);
    return 0;
  }
  if (c.format == Format::Csv) {
    std::cout << "transmitter,receiver,band,reported_by_tx,reported_by_rx,match\n";
    for (const auto& r : m.log) {
      std::cout << r.transmitter + 1 << ',' << r.receiver + 1 << ',' << r.band + 1 << ',' << r.reported_by_tx.str()
                << ',' << r.reported_by_rx.str() << ',' << (r.reported_by_tx == r.reported_by_rx ? 1 : 0) << '\n';
    }
    return 0;
  }
  std::cout << "exchanges=" << m.log.size() << " estimate_matches_truth=" << yes(exact) << '\n';
  std::cout << "excluded=";
  if (m.excluded.empty()) std::cout << "none";
  for (auto it = m.excluded.begin(); it != m.excluded.end(); ++it) {
    std::cout << (it == m.excluded.begin() ? "" : ",") << *it + 1;
  }
  std::cout << '\n';
  if (reduced) {
    std::cout << "remaining users=" << reduced->num_users << '\n';
  } else {
    std::cout << "remaining game rejected: " << reduced_error << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power and spectrum sharing mechanism: catalog, outcomes, equilibria, measurement"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  std::uint64_t seed = 0;
  std::string space = "reach";
  app.add_option("--scenario", common.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--format", common.format, "Output format")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, Format>{{"json", Format::Json}, {"table", Format::Table}, {"csv", Format::Csv}}));
  app.add_option("--jobs", common.jobs, "Worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--serial", common.serial, "Use the serial reference kernels");
  app.add_option("--deviations", space, "Deviation set for the Nash test: grid or reach")
      ->check(CLI::IsMember({"grid", "reach"}));

  auto* enumerate = app.add_subcommand("enumerate", "Bundle count, G_N and optionally the full catalog");
  bool table = false;
  enumerate->add_flag("--table", table, "Print the index to profile table");

  std::string messages, messages_file;
  auto* outcome_cmd = app.add_subcommand("outcome", "Allocation and taxes for a message profile");
  outcome_cmd->add_option("--messages", messages, "n:pi,n:pi,...");
  outcome_cmd->add_option("--messages-file", messages_file, "JSON array of {n, pi}");

  auto* find = app.add_subcommand("find-ne", "Search for grid Nash equilibria");
  std::string method = "both";
  std::size_t starts = 100, max_rounds = 50;
  std::string price = "0";
  find->add_option("--method", method, "unanimity, br or both")->check(CLI::IsMember({"unanimity", "br", "both"}));
  find->add_option("--starts", starts, "Random starts for best-response dynamics");
  find->add_option("--max-rounds", max_rounds, "Round limit per trajectory");
  find->add_option("--price", price, "Common price of the unanimity candidates");

  auto* verify = app.add_subcommand("verify", "Full property report for one candidate");
  verify->add_option("--messages", messages, "n:pi,n:pi,...");
  verify->add_option("--messages-file", messages_file, "JSON array of {n, pi}");

  auto* roundtrip = app.add_subcommand("lindahl-roundtrip", "Lindahl allocation to messages and back");
  std::string psi_path, pi1 = "1";
  roundtrip->add_option("--psi", psi_path, "JSON {allocation, prices, taxes?}")->required();
  roundtrip->add_option("--pi1", pi1, "Anchor price of user 1");

  auto* measure = app.add_subcommand("measure", "Pilot exchange, consistency check and exclusion");
  std::string tolerance = "0";
  measure->add_option("--tolerance", tolerance, "Largest accepted gap between the two reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (seed_opt->count()) common.seed = seed;
  common.space = space == "grid" ? DeviationSpace::Grid : DeviationSpace::GridAndReach;
  if (common.jobs > 0) kernels::set_num_threads(common.jobs);

  try {
    if (*enumerate) return cmd_enumerate(common, table);
    if (*outcome_cmd) return cmd_outcome(common, messages, messages_file);
    if (*find) return cmd_find_ne(common, method, starts, price, max_rounds);
    if (*verify) return cmd_verify(common, messages, messages_file);
    if (*roundtrip) return cmd_roundtrip(common, psi_path, pi1);
    if (*measure) return cmd_measure(common, tolerance);
  } catch (const psm::ContractError& e) {
    std::cerr << "contract violation: " << e.what() << '\n';
    return 3;
  } catch (const psm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const psm::DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return 2;
  } catch (const psm::OverflowError& e) {
    std::cerr << "arithmetic range exceeded: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
