#include <gtest/gtest.h>

#include <cmath>

#include "psm/errors.hpp"
#include "psm/model.hpp"
#include "support.hpp"

namespace psm {
namespace {

using testing::Gen;

TEST(Rational, NormalizesAndPrints) {
  EXPECT_EQ(Rational(4, -6).str(), "-2/3");
  EXPECT_EQ(Rational(10, 5).str(), "2");
  EXPECT_EQ(Rational(0, -7).str(), "0");
  EXPECT_THROW(Rational(1, 0), DomainError);
}

TEST(Rational, ParsesFractionsAndDecimals) {
  EXPECT_EQ(Rational::parse("-26/3"), Rational(-26, 3));
  EXPECT_EQ(Rational::parse("0.125"), Rational(1, 8));
  EXPECT_EQ(Rational::parse("-2.5e-1"), Rational(-1, 4));
  EXPECT_EQ(Rational::parse("3e2"), Rational(300));
  EXPECT_EQ(Rational::from_double(0.1), Rational(1, 10));
  EXPECT_THROW(Rational::parse("1/"), ConfigError);
  EXPECT_THROW(Rational::parse("abc"), ConfigError);
  EXPECT_THROW(Rational::parse("1/0"), ConfigError);
}

TEST(Rational, ArithmeticMatchesCrossMultiplication) {
  Gen g(1);
  for (int i = 0; i < 2000; ++i) {
    const Rational a = g.rational(-50, 50, 30);
    const Rational b = g.rational(-50, 50, 30);
    // a + b == (an*bd + bn*ad) / (ad*bd), independently of the reduction path.
    EXPECT_EQ(a + b, Rational(a.num() * b.den() + b.num() * a.den(), a.den() * b.den()));
    EXPECT_EQ(a * b, Rational(a.num() * b.num(), a.den() * b.den()));
    EXPECT_EQ((a - b) + b, a);
    if (!b.is_zero()) EXPECT_EQ((a / b) * b, a);
    EXPECT_EQ(a < b, a.to_double() < b.to_double() && !(a == b));
  }
}

TEST(Rational, OverflowIsReportedNotWrapped) {
  const Rational big{INT64_MAX};
  EXPECT_THROW(big + Rational{1}, OverflowError);
  EXPECT_THROW(big * Rational{2}, OverflowError);
  EXPECT_THROW(-Rational{INT64_MIN}, OverflowError);
  EXPECT_EQ(big * Rational(1, 2), Rational(INT64_MAX, 2));
}

TEST(Bundles, SpecExamples) {
  const auto one = enumerate_bundles(std::vector<Rational>{0}, 2, Rational{5});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].powers, (std::vector<Rational>{0, 0}));

  const auto six = enumerate_bundles(std::vector<Rational>{0, 1, 2}, 2, Rational{2});
  const std::vector<std::vector<Rational>> want{{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {2, 0}};
  ASSERT_EQ(six.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(six[i].powers, want[i]);

  const auto zero = enumerate_bundles(std::vector<Rational>{0, 1}, 1, Rational{0});
  ASSERT_EQ(zero.size(), 1u);
  EXPECT_EQ(zero[0].powers, std::vector<Rational>{0});
}

TEST(Bundles, EqualBruteForceFilter) {
  Gen g(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Rational> q{0};
    const auto levels = g.integer(0, 4);
    for (int i = 0; i < levels; ++i) q.push_back(q.back() + g.rational(1, 3, 4));
    const auto f = static_cast<std::size_t>(g.integer(1, 4));
    const Rational budget = g.nonneg(6, 4);
    const auto got = enumerate_bundles(q, f, budget);
    const auto want = testing::oracle_bundles(q, f, budget);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_EQ(got[i].powers, want[i]);
  }
}

TEST(Catalog, SizesAndIndexZeroReserved) {
  const auto six = enumerate_bundles(std::vector<Rational>{0, 1, 2}, 2, Rational{2});
  const ProfileCatalog desk(3, six);
  EXPECT_EQ(desk.size(), 216);
  const ProfileCatalog single(3, enumerate_bundles(std::vector<Rational>{0}, 2, Rational{1}));
  EXPECT_EQ(single.size(), 1);
  EXPECT_EQ(single.profile_of(1), (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_FALSE(desk.contains(0));
  EXPECT_FALSE(desk.contains(217));
  EXPECT_THROW((void)desk.profile_of(0), DomainError);
  EXPECT_THROW((void)desk.profile_of(217), DomainError);
}

TEST(Catalog, IsABijection) {
  const auto bundles = enumerate_bundles(std::vector<Rational>{0, 1, 2}, 2, Rational{2});
  const ProfileCatalog cat(3, bundles);
  // Index order is mixed radix with user 1 most significant.
  ProfileIndex k = 0;
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = 0; b < 6; ++b) {
      for (std::size_t c = 0; c < 6; ++c) {
        ++k;
        const std::vector<std::size_t> digits{a, b, c};
        EXPECT_EQ(cat.index_of(digits), k);
        EXPECT_EQ(cat.profile_of(k), digits);
        const std::vector<PowerBundle> profile{bundles[a], bundles[b], bundles[c]};
        EXPECT_EQ(cat.index_of(profile), k);
      }
    }
  }
  EXPECT_EQ(k, cat.size());
}

TEST(Catalog, RejectsOversizedProducts) {
  std::vector<PowerBundle> many;
  for (int i = 0; i < 300; ++i) many.push_back({{Rational{i}}});
  EXPECT_THROW(ProfileCatalog(3, many), ConfigError);
}

ScenarioConfig sir_config() {
  // One band, bundles {0, 1, 2}; user 1 at power 1, user 2 at power 2.
  ScenarioConfig c = testing::tiny_config();
  c.quant_levels = {0, 1, 2};
  c.power_budget = 2;
  c.gains.at(1, 0, 0) = Rational{1, 2};
  c.gains.at(2, 0, 0) = Rational{1, 2};
  c.utilities.assign(3, SirQuasiLinear{{1.0}});
  return c;
}

TEST(Sir, SpecExamples) {
  const ScenarioConfig c = sir_config();
  const ProfileCatalog cat(3, enumerate_bundles(c.quant_levels, 1, c.power_budget));
  const std::vector<std::size_t> alone{1, 0, 0};
  EXPECT_EQ(sir_exact(cat.index_of(alone), 0, 0, c, cat), Rational{1});
  EXPECT_DOUBLE_EQ(sir(cat.index_of(alone), 0, 0, c, cat), 1.0);
  const std::vector<std::size_t> interfered{1, 2, 0};
  EXPECT_EQ(sir_exact(cat.index_of(interfered), 0, 0, c, cat), Rational(1, 2));
  const std::vector<std::size_t> silent{0, 2, 2};
  EXPECT_EQ(sir(cat.index_of(silent), 0, 0, c, cat), 0.0);
  EXPECT_THROW((void)sir(0, 0, 0, c, cat), DomainError);
}

TEST(Sir, InvariantUnderCommonScaling) {
  Gen g(3);
  for (int trial = 0; trial < 50; ++trial) {
    ScenarioConfig c = sir_config();
    for (UserId tx = 0; tx < 3; ++tx) {
      for (UserId rx = 0; rx < 3; ++rx) c.gains.at(tx, rx, 0) = g.rational(0, 3, 7);
    }
    c.noise_half_density = g.rational(1, 4, 5);
    ScenarioConfig scaled = c;
    const Rational factor = g.rational(1, 9, 7);
    for (UserId tx = 0; tx < 3; ++tx) {
      for (UserId rx = 0; rx < 3; ++rx) scaled.gains.at(tx, rx, 0) *= factor;
    }
    scaled.noise_half_density *= factor;
    const ProfileCatalog cat(3, enumerate_bundles(c.quant_levels, 1, c.power_budget));
    for (ProfileIndex k = 1; k <= cat.size(); ++k) {
      for (UserId u = 0; u < 3; ++u) {
        const double a = sir(k, u, 0, c, cat);
        const double b = sir(k, u, 0, scaled, cat);
        EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
      }
    }
  }
}

TEST(Utility, SpecExamples) {
  ScenarioConfig c = testing::with_tables(testing::tiny_config(), [](UserId, ProfileIndex) { return Rational{7}; });
  const Scenario s(c);
  EXPECT_EQ(*s.utility(0, 3, 2).exact, Rational{5});
  EXPECT_EQ(*s.utility(0, 0, 0).exact, Rational{0});

  c.utilities.assign(3, NonQuasiLinear{std::vector<Rational>(8, Rational{1}), Rational{1}});
  const Scenario n(c);
  EXPECT_DOUBLE_EQ(n.utility(1, 5, -1).approx, 2.0);
}

TEST(Utility, MonotoneInTaxAndDominatesNull) {
  Gen g(4);
  ScenarioConfig tables = testing::with_tables(testing::tiny_config(), [&](UserId, ProfileIndex) {
    return g.nonneg(10);
  });
  ScenarioConfig sirs = tables;
  sirs.utilities.assign(3, SirQuasiLinear{{0.7}});
  ScenarioConfig cubic = tables;
  for (auto& u : cubic.utilities) u = NonQuasiLinear{std::get<QuasiLinearTable>(u).values, Rational{1, 3}};
  for (const auto& cfg : {tables, sirs, cubic}) {
    const Scenario s(cfg);
    const bool strict = !std::holds_alternative<NonQuasiLinear>(cfg.utilities[0]);
    for (int trial = 0; trial < 300; ++trial) {
      const auto k = g.integer(1, s.catalog_size());
      const auto u = static_cast<UserId>(g.integer(0, 2));
      const Rational t = g.rational(-5, 5);
      const Rational more = t + g.rational(1, 3);
      const auto at_t = s.utility(u, k, t);
      const auto at_more = s.utility(u, k, more);
      EXPECT_LE(compare_utility(at_more, at_t), 0);
      if (strict) EXPECT_LT(compare_utility(at_more, at_t), 0);
      EXPECT_GE(compare_utility(at_t, s.utility(u, 0, t)), 0);
    }
  }
}

TEST(Utility, CompareIsExactForTables) {
  const UtilityValue a{1.0, Rational{1}};
  const UtilityValue b{1.0, Rational(1000000000001, 1000000000000)};
  EXPECT_EQ(compare_utility(a, b), -1);
  const UtilityValue fa{1.0, std::nullopt};
  const UtilityValue fb{1.0 + 1e-13, std::nullopt};
  EXPECT_EQ(compare_utility(fa, fb), 0);
  EXPECT_EQ(compare_utility(fa, UtilityValue{1.1, std::nullopt}), -1);
}

TEST(Scenario, ValidationNamesTheField) {
  ScenarioConfig c = testing::with_tables(testing::tiny_config(), [](UserId, ProfileIndex) { return Rational{1}; });
  auto expect_field = [](ScenarioConfig bad, const std::string& field) {
    try {
      Scenario s(std::move(bad));
      ADD_FAILURE() << "accepted config, expected error on " << field;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  {
    ScenarioConfig bad = c;
    bad.num_users = 2;
    expect_field(bad, "num_users");
  }
  {
    ScenarioConfig bad = c;
    bad.quant_levels = {1, 2};
    expect_field(bad, "quant_levels");
  }
  {
    ScenarioConfig bad = c;
    bad.noise_half_density = 0;
    expect_field(bad, "noise_half_density");
  }
  {
    ScenarioConfig bad = c;
    bad.gains.at(0, 1, 0) = -1;
    expect_field(bad, "gains");
  }
  {
    ScenarioConfig bad = c;
    std::get<QuasiLinearTable>(bad.utilities[1]).values.pop_back();
    expect_field(bad, "utilities[1]");
  }
  {
    ScenarioConfig bad = c;
    std::get<QuasiLinearTable>(bad.utilities[2]).values[3] = -1;
    expect_field(bad, "utilities[2].values[3]");
  }
  {
    ScenarioConfig bad = c;
    bad.utilities[0] = NonQuasiLinear{std::vector<Rational>(8, Rational{1}), Rational{0}};
    expect_field(bad, "beta");
  }
}

TEST(Scenario, ValueRangeChecked) {
  const Scenario s(testing::with_tables(testing::tiny_config(), [](UserId, ProfileIndex k) { return Rational{k}; }));
  EXPECT_EQ(*s.value(0, 8).exact, Rational{8});
  EXPECT_EQ(*s.value(0, 0).exact, Rational{0});
  EXPECT_THROW((void)s.value(0, 9), DomainError);
  EXPECT_THROW((void)s.value(0, -1), DomainError);
}

}  // namespace
}  // namespace psm
