#pragma once

#include <set>
#include <variant>
#include <vector>

#include "psm/model.hpp"
#include "psm/rational.hpp"

namespace psm {

/// Follows the agreed protocol.
struct Honest {};

/// Sends pilots at scale[band] * p instead of p. `partners` restricts the
/// cheat to exchanges with those users; empty means every partner.
struct PilotCheat {
  std::vector<Rational> scale;
  std::set<UserId> partners;
};

/// Reports factor[band] * received + offset[band] instead of the received power.
struct ReportCheat {
  std::vector<Rational> factor;
  std::vector<Rational> offset;
  std::set<UserId> partners;
};

using AgentBehavior = std::variant<Honest, PilotCheat, ReportCheat>;

/// Received powers reported to the accountant for one (transmitter, receiver, band) exchange.
struct GainReport {
  UserId transmitter = 0;
  UserId receiver = 0;
  BandId band = 0;
  Rational reported_by_tx;  // what transmitter i heard from receiver j
  Rational reported_by_rx;  // what receiver j heard from transmitter i

  friend bool operator==(const GainReport&, const GainReport&) = default;
};

struct MeasurementResult {
  GainTensor estimated;
  std::set<UserId> excluded;
  std::vector<GainReport> log;  // pair-major, band-minor: protocol order
};

/// Pilot exchange at power `pilot_power` for every ordered pair of distinct
/// users and every band. The estimate is the receiver's report over the
/// pilot power; the direct gains h_ii come from each user's own link and
/// cannot be cross-checked. A pair whose two reports differ by more than
/// `tolerance` at any band is excluded, both users.
MeasurementResult run_measurement(const GainTensor& true_gains, const std::vector<AgentBehavior>& behaviors,
                                  const Rational& pilot_power, const Rational& tolerance = Rational{0});

/// Scenario restricted to the users not in `excluded`, re-indexed in order.
/// Table utilities are re-indexed over the smaller catalog by evaluating
/// each reduced profile with the excluded users silent.
ScenarioConfig exclusion_consequence(const std::set<UserId>& excluded, const ScenarioConfig& config);

}  // namespace psm
