#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "psm/model.hpp"
#include "psm/rational.hpp"

namespace psm {

/// m_i = (n_i, pi_i): a proposed profile index (any integer) and a price >= 0.
struct Message {
  std::int64_t n = 0;
  Rational pi{0};

  friend bool operator==(const Message&, const Message&) = default;
  friend std::strong_ordering operator<=>(const Message& a, const Message& b) {
    if (auto c = a.n <=> b.n; c != 0) return c;
    return a.pi <=> b.pi;
  }
};

/// One message per user, user 1 first. Neighbours are cyclic: the user
/// after N is user 1.
class MessageProfile {
 public:
  MessageProfile() = default;
  explicit MessageProfile(std::vector<Message> messages);

  [[nodiscard]] std::size_t size() const noexcept { return messages_.size(); }
  [[nodiscard]] const Message& operator[](UserId i) const { return messages_[i]; }
  [[nodiscard]] const std::vector<Message>& messages() const noexcept { return messages_; }

  /// Message of the user `offset` places after `i`, cyclically.
  [[nodiscard]] const Message& next(UserId i, std::size_t offset) const {
    return messages_[(i + offset) % messages_.size()];
  }

  /// Copy with user i's message replaced (m_i, m_{-i}).
  [[nodiscard]] MessageProfile with(UserId i, const Message& m) const;
  void set(UserId i, const Message& m);

  friend bool operator==(const MessageProfile&, const MessageProfile&) = default;
  friend auto operator<=>(const MessageProfile& a, const MessageProfile& b) { return a.messages_ <=> b.messages_; }

 private:
  std::vector<Message> messages_;
};

/// Allocation chosen by the outcome function plus one tax per user.
/// Positive taxes are paid to the accountant agent, negative ones are subsidies.
struct Outcome {
  ProfileIndex allocation = kNullAllocation;
  std::vector<Rational> taxes;

  friend bool operator==(const Outcome&, const Outcome&) = default;
};

/// The three additive parts of a user's tax.
struct TaxBreakdown {
  Rational allocation_charge;  // int(avg n) * (pi_{i+1} - pi_{i+2}) / N
  Rational proposal_penalty;   // (n_i - n_{i+1})^2 * pi_i
  Rational balancing_credit;   // -(n_{i+1} - n_{i+2})^2 * pi_{i+1}

  [[nodiscard]] Rational total() const { return allocation_charge + proposal_penalty + balancing_credit; }
};

/// Nearest integer to the exact mean; halves round away from zero.
std::int64_t rounded_average(std::span<const std::int64_t> proposals);
std::int64_t rounded_average(const MessageProfile& profile);

/// `value` if it lies in 1..g_n, otherwise the null allocation.
ProfileIndex clip_allocation(std::int64_t value, ProfileIndex g_n);

/// Tax components of user i. All zero when the unclipped rounded average is
/// outside 1..g_n.
TaxBreakdown tax_breakdown(const MessageProfile& profile, UserId user, ProfileIndex g_n);
Rational tax(const MessageProfile& profile, UserId user, ProfileIndex g_n);

Outcome outcome(const MessageProfile& profile, ProfileIndex g_n);
Outcome outcome(const MessageProfile& profile, const ProfileCatalog& catalog);

/// Personalized price L_i = (pi_{i+1} - pi_{i+2}) / N.
Rational lindahl_price(const MessageProfile& profile, UserId user);
std::vector<Rational> lindahl_prices(const MessageProfile& profile);

/// Sum of all taxes. Identically zero; computed, not assumed.
Rational budget_sum(const MessageProfile& profile, ProfileIndex g_n);

}  // namespace psm
