#include "psm/rational.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

#include "psm/errors.hpp"

namespace psm {
namespace {

using wide = __int128;

constexpr wide kMax = std::numeric_limits<std::int64_t>::max();
constexpr wide kMin = std::numeric_limits<std::int64_t>::min();
// Cap for decimal parsing; keeps the mantissa well inside 128 bits.
constexpr wide kParseCap = static_cast<wide>(1) << 120;

wide abs_wide(wide v) { return v < 0 ? -v : v; }

wide gcd_wide(wide a, wide b) {
  a = abs_wide(a);
  b = abs_wide(b);
  while (b != 0) {
    const wide t = a % b;
    a = b;
    b = t;
  }
  return a;
}

bool checked_mul(wide a, wide b, wide& out) { return !__builtin_mul_overflow(a, b, &out); }

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  *this = from_wide(num, den);
}

Rational Rational::from_wide(wide num, wide den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const wide g = gcd_wide(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num > kMax || num < kMin || den > kMax) {
    throw OverflowError("rational result exceeds 64-bit range");
  }
  Rational r;
  r.num_ = static_cast<std::int64_t>(num);
  r.den_ = static_cast<std::int64_t>(num == 0 ? 1 : den);
  return r;
}

Rational Rational::operator-() const { return from_wide(-static_cast<wide>(num_), den_); }

Rational& Rational::operator+=(const Rational& rhs) {
  if (den_ == rhs.den_) {
    *this = from_wide(static_cast<wide>(num_) + rhs.num_, den_);
    return *this;
  }
  // Both factors fit in 64 bits, so each product fits in 127 bits.
  const wide g = gcd_wide(den_, rhs.den_);
  const wide lhs_scale = rhs.den_ / g;
  const wide rhs_scale = den_ / g;
  wide num = static_cast<wide>(num_) * lhs_scale;
  wide other = static_cast<wide>(rhs.num_) * rhs_scale;
  wide den = 0;
  if (__builtin_add_overflow(num, other, &num) || !checked_mul(den_, lhs_scale, den)) {
    throw OverflowError("rational addition overflow");
  }
  *this = from_wide(num, den);
  return *this;
}

Rational& Rational::operator-=(const Rational& rhs) { return *this += -rhs; }

Rational& Rational::operator*=(const Rational& rhs) {
  // Cross-reduce first so intermediate products stay small.
  const wide g1 = gcd_wide(num_, rhs.den_);
  const wide g2 = gcd_wide(rhs.num_, den_);
  const wide a = g1 > 1 ? num_ / g1 : num_;
  const wide d = g1 > 1 ? rhs.den_ / g1 : rhs.den_;
  const wide c = g2 > 1 ? rhs.num_ / g2 : rhs.num_;
  const wide b = g2 > 1 ? den_ / g2 : den_;
  *this = from_wide(a * c, b * d);
  return *this;
}

Rational& Rational::operator/=(const Rational& rhs) {
  if (rhs.num_ == 0) throw DomainError("rational division by zero");
  const wide n = rhs.den_;
  const wide d = rhs.num_;
  if (d == kMin) throw OverflowError("rational reciprocal overflow");
  // Reciprocal of a normalized rational is normalized up to sign.
  Rational inv;
  inv.num_ = static_cast<std::int64_t>(d < 0 ? -n : n);
  inv.den_ = static_cast<std::int64_t>(d < 0 ? -d : d);
  return *this *= inv;
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) noexcept {
  const wide lhs = static_cast<wide>(a.num_) * b.den_;
  const wide rhs = static_cast<wide>(b.num_) * a.den_;
  return lhs <=> rhs;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational Rational::parse(std::string_view text) {
  const auto fail = [&]() -> Rational {
    throw ConfigError("malformed rational '" + std::string(text) + "'");
  };
  if (text.empty()) return fail();

  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    std::int64_t num = 0;
    std::int64_t den = 0;
    const auto lhs = text.substr(0, slash);
    const auto rhs = text.substr(slash + 1);
    auto [p1, e1] = std::from_chars(lhs.data(), lhs.data() + lhs.size(), num);
    auto [p2, e2] = std::from_chars(rhs.data(), rhs.data() + rhs.size(), den);
    if (e1 != std::errc{} || p1 != lhs.data() + lhs.size() || e2 != std::errc{} ||
        p2 != rhs.data() + rhs.size() || den == 0) {
      return fail();
    }
    return Rational(num, den);
  }

  // Decimal literal: [sign] digits [. digits] [e|E [sign] digits]
  std::size_t pos = 0;
  bool negative = false;
  if (text[pos] == '+' || text[pos] == '-') {
    negative = text[pos] == '-';
    ++pos;
  }
  wide mantissa = 0;
  int scale = 0;
  bool any_digit = false;
  bool seen_point = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c == '.') {
      if (seen_point) return fail();
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') break;
    any_digit = true;
    mantissa = mantissa * 10 + (c - '0');
    if (mantissa > kParseCap) throw OverflowError("decimal literal too long: " + std::string(text));
    if (seen_point) --scale;
  }
  if (!any_digit) return fail();
  if (pos < text.size()) {
    if (text[pos] != 'e' && text[pos] != 'E') return fail();
    ++pos;
    int exponent = 0;
    const auto rest = text.substr(pos);
    const char* first = rest.data();
    if (!rest.empty() && rest.front() == '+') ++first;
    auto [p, ec] = std::from_chars(first, rest.data() + rest.size(), exponent);
    if (ec != std::errc{} || p != rest.data() + rest.size()) return fail();
    scale += exponent;
  }
  wide den = 1;
  for (; scale > 0; --scale) {
    if (!checked_mul(mantissa, 10, mantissa) || mantissa > kParseCap) {
      throw OverflowError("decimal literal out of range: " + std::string(text));
    }
  }
  for (; scale < 0; ++scale) {
    if (!checked_mul(den, 10, den) || den > kParseCap) {
      throw OverflowError("decimal literal out of range: " + std::string(text));
    }
  }
  return from_wide(negative ? -mantissa : mantissa, den);
}

Rational Rational::from_double(double value) {
  if (!std::isfinite(value)) throw ConfigError("non-finite number where a rational is required");
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw ConfigError("cannot format number");
  return parse(std::string_view(buf.data(), static_cast<std::size_t>(end - buf.data())));
}

std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

}  // namespace psm
