#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "support.hpp"

namespace {

using nlohmann::json;

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(PSM_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (const auto n = fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scen(const std::string& name) { return "--scenario " + psm::testing::scenario_path(name).string(); }

json parse(const Run& r) {
  json j = json::parse(r.out);
  j.erase("timing_ms");
  return j;
}

TEST(Cli, EnumerateDesk) {
  const auto r = cli(scen("desk.json") + " enumerate");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "bundles=6, G_N=216\n");
  const auto single = cli(scen("single_profile.json") + " enumerate");
  EXPECT_EQ(single.out, "bundles=1, G_N=1\n");
  const auto table = cli(scen("desk.json") + " --format json enumerate --table");
  EXPECT_EQ(parse(table)["profiles"].size(), 216u);
}

TEST(Cli, ConfigErrorsExitTwoAndNameTheField) {
  const auto two = cli(scen("two_users.json") + " enumerate");
  EXPECT_EQ(two.code, 2);
  EXPECT_NE(two.out.find("num_users"), std::string::npos);
  const auto bad = cli(scen("malformed.json") + " enumerate");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("grid.pi_stride"), std::string::npos);
  EXPECT_EQ(cli(scen("desk.json") + " outcome --messages 1:1,2").code, 2);
  EXPECT_EQ(cli(scen("desk.json") + " outcome --messages 1:1,2:2").code, 2);
  EXPECT_EQ(cli(scen("desk.json") + " --format xml enumerate").code, 2);
  EXPECT_EQ(cli("enumerate").code, 2);
}

TEST(Cli, OutcomeRendersExactTaxes) {
  const auto r = cli(scen("desk.json") + " outcome --messages 1:1,2:2,3:3");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "allocation=2\nt1=-5/3\nt2=-26/3\nt3=31/3\nsum=0\n");
  const auto j = parse(cli(scen("desk.json") + " --format json outcome --messages 9:1/2,9:1/2,9:1/2"));
  EXPECT_EQ(j["outcome"]["allocation"], 9);
  EXPECT_EQ(j["outcome"]["taxes"], json({"0", "0", "0"}));
  EXPECT_EQ(j["catalog"]["G_N"], 216);
}

TEST(Cli, FindNeListsTheDeskEquilibriumWithFlags) {
  const auto r = cli(scen("desk.json") + " --jobs 4 --format json find-ne --method unanimity");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = parse(r);
  ASSERT_EQ(j["equilibria"].size(), 1u);
  const auto& e = j["equilibria"][0];
  EXPECT_EQ(e["outcome"]["allocation"], 173);
  EXPECT_TRUE(e["lemma1"].get<bool>());
  EXPECT_TRUE(e["lindahl"]["c3"].get<bool>());
  EXPECT_TRUE(e["chain_holds"].get<bool>());
  EXPECT_EQ(j["unanimity"]["candidates"], 216);
  const auto csv = cli(scen("desk.json") + " --format csv find-ne --method unanimity");
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 2);
}

TEST(Cli, FindNeIsDeterministicUnderSeed) {
  const std::string args = " --format json --seed 5 find-ne --method br --starts 12";
  const auto a = parse(cli(scen("desk.json") + args));
  const auto b = parse(cli(scen("desk.json") + " --jobs 2" + args));
  const auto serial = parse(cli(scen("desk.json") + " --serial" + args));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, serial);
  EXPECT_EQ(a["seed"], 5);
  EXPECT_EQ(a["br"]["trajectories"].size(), 12u);
}

TEST(Cli, NoEquilibriumIsNotAnError) {
  const auto r = cli(scen("sir.json") + " --format json find-ne --method unanimity");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(parse(r)["equilibria"].empty());
}

TEST(Cli, VerifyAndRoundTrip) {
  const auto v = parse(cli(scen("desk.json") + " --format json verify --messages 173:0,173:0,173:0"));
  EXPECT_TRUE(v["report"]["nash"]["is_ne_on_grid"].get<bool>());
  const auto off = parse(cli(scen("desk.json") + " --format json verify --messages 1:0,2:0,3:0"));
  EXPECT_FALSE(off["report"]["nash"]["is_ne_on_grid"].get<bool>());
  EXPECT_TRUE(off["report"]["nash"].contains("best_deviation"));

  const auto rt = cli(scen("desk.json") + " --format json lindahl-roundtrip --psi " +
                      psm::testing::scenario_path("psi_zero_price.json").string() + " --pi1 1");
  ASSERT_EQ(rt.code, 0) << rt.out;
  EXPECT_TRUE(parse(rt)["matches"].get<bool>());
  const auto neg = cli(scen("desk.json") + " lindahl-roundtrip --psi " +
                       psm::testing::scenario_path("psi_priced.json").string() + " --pi1 0");
  EXPECT_EQ(neg.code, 2);
  EXPECT_NE(neg.out.find("pi_1"), std::string::npos);
}

TEST(Cli, Measure) {
  const auto honest = parse(cli(scen("desk.json") + " --format json measure"));
  EXPECT_TRUE(honest["estimate_matches_truth"].get<bool>());
  EXPECT_TRUE(honest["measurement"]["excluded"].empty());
  const auto cheat = cli(scen("sir.json") + " --format json measure");
  ASSERT_EQ(cheat.code, 0);
  EXPECT_EQ(parse(cheat)["measurement"]["excluded"], json({2, 3}));
}

}  // namespace
