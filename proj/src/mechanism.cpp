#include "psm/mechanism.hpp"

#include <limits>
#include <string>

#include "psm/errors.hpp"

namespace psm {

MessageProfile::MessageProfile(std::vector<Message> messages) : messages_(std::move(messages)) {
  if (messages_.empty()) throw DomainError("message profile is empty");
  for (std::size_t i = 0; i < messages_.size(); ++i) {
    if (messages_[i].pi.sign() < 0) throw DomainError("price of user " + std::to_string(i + 1) + " is negative");
  }
}

MessageProfile MessageProfile::with(UserId i, const Message& m) const {
  MessageProfile copy = *this;
  copy.set(i, m);
  return copy;
}

void MessageProfile::set(UserId i, const Message& m) {
  if (m.pi.sign() < 0) throw DomainError("price of user " + std::to_string(i + 1) + " is negative");
  messages_.at(i) = m;
}

namespace {

// |mean| <= max |n_i|, so the result always fits.
std::int64_t round_mean(__int128 sum, std::size_t size) {
  const auto count = static_cast<__int128>(size);
  const __int128 magnitude = sum < 0 ? -sum : sum;
  const __int128 rounded = (2 * magnitude + count) / (2 * count);
  return static_cast<std::int64_t>(sum < 0 ? -rounded : rounded);
}

}  // namespace

std::int64_t rounded_average(std::span<const std::int64_t> proposals) {
  if (proposals.empty()) throw DomainError("rounded_average of an empty vector");
  __int128 sum = 0;
  for (const auto n : proposals) sum += n;
  return round_mean(sum, proposals.size());
}

std::int64_t rounded_average(const MessageProfile& profile) {
  if (profile.size() == 0) throw DomainError("rounded_average of an empty vector");
  __int128 sum = 0;
  for (const auto& m : profile.messages()) sum += m.n;
  return round_mean(sum, profile.size());
}

ProfileIndex clip_allocation(std::int64_t value, ProfileIndex g_n) {
  return (value >= 1 && value <= g_n) ? value : kNullAllocation;
}

TaxBreakdown tax_breakdown(const MessageProfile& profile, UserId user, ProfileIndex g_n) {
  const std::size_t count = profile.size();
  if (user >= count) throw DomainError("user id out of range");
  const std::int64_t average = rounded_average(profile);
  if (average < 1 || average > g_n) return {};

  const Message& self = profile[user];
  const Message& next = profile.next(user, 1);
  const Message& after = profile.next(user, 2);
  const auto squared_gap = [](std::int64_t a, std::int64_t b) {
    const __int128 d = static_cast<__int128>(a) - b;
    const __int128 sq = d * d;
    if (sq > std::numeric_limits<std::int64_t>::max()) throw OverflowError("proposal gap too large");
    return Rational{static_cast<std::int64_t>(sq)};
  };

  TaxBreakdown out;
  out.allocation_charge = Rational{average} * (next.pi - after.pi) / Rational{static_cast<std::int64_t>(count)};
  out.proposal_penalty = squared_gap(self.n, next.n) * self.pi;
  out.balancing_credit = -(squared_gap(next.n, after.n) * next.pi);
  return out;
}

Rational tax(const MessageProfile& profile, UserId user, ProfileIndex g_n) {
  return tax_breakdown(profile, user, g_n).total();
}

Outcome outcome(const MessageProfile& profile, ProfileIndex g_n) {
  Outcome out;
  out.allocation = clip_allocation(rounded_average(profile), g_n);
  out.taxes.reserve(profile.size());
  for (UserId i = 0; i < profile.size(); ++i) out.taxes.push_back(tax(profile, i, g_n));
  return out;
}

Outcome outcome(const MessageProfile& profile, const ProfileCatalog& catalog) {
  if (profile.size() != catalog.num_users()) {
    throw DomainError("message profile has " + std::to_string(profile.size()) + " entries, expected " +
                      std::to_string(catalog.num_users()));
  }
  return outcome(profile, catalog.size());
}

Rational lindahl_price(const MessageProfile& profile, UserId user) {
  if (user >= profile.size()) throw DomainError("user id out of range");
  return (profile.next(user, 1).pi - profile.next(user, 2).pi) / Rational{static_cast<std::int64_t>(profile.size())};
}

std::vector<Rational> lindahl_prices(const MessageProfile& profile) {
  std::vector<Rational> out;
  out.reserve(profile.size());
  for (UserId i = 0; i < profile.size(); ++i) out.push_back(lindahl_price(profile, i));
  return out;
}

Rational budget_sum(const MessageProfile& profile, ProfileIndex g_n) {
  Rational sum{0};
  for (UserId i = 0; i < profile.size(); ++i) sum += tax(profile, i, g_n);
  return sum;
}

}  // namespace psm
