#include "ferify/scenario.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

namespace ferify {
namespace {

namespace fs = std::filesystem;

const fs::path kDir = FERIFY_SCENARIO_DIR;

RunConfig config_for(const std::string& name) {
  RunConfig c;
  c.sacl_path = (kDir / (name + ".sacl")).string();
  c.scenario_path = (kDir / (name + ".jsonl")).string();
  if (fs::exists(kDir / (name + ".secrets"))) c.auth_secrets_path = (kDir / (name + ".secrets")).string();
  c.exec_whitelist = fs::exists(kDir / (name + ".args"));
  return c;
}

std::size_t sys_events(const std::string& name) {
  std::ifstream in(kDir / (name + ".jsonl"));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (line.find("\"ev\":\"sys\"") != std::string::npos) ++n;
  return n;
}

class BundledScenario : public ::testing::TestWithParam<std::string> {};

TEST_P(BundledScenario, AllExpectationsHold) {
  for (TrapMode mode : {TrapMode::Classic4, TrapMode::Nop2}) {
    RunConfig c = config_for(GetParam());
    c.trap_mode = mode;
    ScenarioReport r = run_scenario(c);
    for (const auto& m : r.mismatch_messages) ADD_FAILURE() << m;
    EXPECT_EQ(r.exit_code(), 0);
    EXPECT_GT(r.expectations, 0u);
    EXPECT_EQ(r.decision_log.size(), sys_events(GetParam()));
    EXPECT_EQ(r.trap_records.size(), r.decision_log.size());
    EXPECT_EQ(r.total_switches, static_cast<long>(r.trap_records.size()) * (mode == TrapMode::Classic4 ? 4 : 2));
  }
}

INSTANTIATE_TEST_SUITE_P(Scenarios, BundledScenario,
                         ::testing::Values("root_passwd_denied", "sudo_denied", "two_step_auth", "insmod_denied",
                                           "exec_whitelist"));

TEST(Scenario, MismatchIsReported) {
  ScenarioReport r = run_scenario(config_for("mismatch"));
  EXPECT_EQ(r.exit_code(), 1);
  EXPECT_EQ(r.mismatches, 1u);
}

TEST(Scenario, BadSaclIsAConfigError) { EXPECT_THROW(run_scenario(config_for("bad_sacl")), ScenarioError); }

TEST(Scenario, MissingFiles) {
  RunConfig c;
  c.sacl_path = "/nonexistent.sacl";
  c.scenario_path = "/nonexistent.jsonl";
  EXPECT_THROW(run_scenario(c), ScenarioError);
}

TEST(Scenario, MalformedLinesNameTheLine) {
  Simulator sim{Sacl{}};
  try {
    run_scenario_text("{\"ev\":\"user\",\"uid\":1,\"gid\":1,\"name\":\"a\"}\n{not json}\n", sim);
    FAIL() << "expected ScenarioError";
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  Simulator sim2{Sacl{}};
  EXPECT_THROW(run_scenario_text("{\"ev\":\"sys\",\"pid\":1,\"call\":\"read\"}\n", sim2), ScenarioError);
  Simulator sim3{Sacl{}};
  EXPECT_THROW(run_scenario_text("{\"ev\":\"expect\",\"decision\":\"permit\"}\n", sim3), ScenarioError);
  Simulator sim4{Sacl{}};
  EXPECT_THROW(run_scenario_text("{\"ev\":\"sys\",\"pid\":42,\"call\":\"exit\"}\n", sim4), ScenarioError);
}

TEST(Scenario, InlineRun) {
  Simulator sim{parse_sacl("/etc/shadow 400 0 0\n")};
  ScenarioReport r = run_scenario_text(
      "# comment lines and blanks are skipped\n"
      "\n"
      "{\"ev\":\"file\",\"path\":\"/etc/shadow\",\"uid\":0,\"gid\":0,\"perm\":\"640\"}\n"
      "{\"ev\":\"spawn\",\"pid\":5,\"parent\":1,\"uid\":0,\"gid\":0}\n"
      "{\"ev\":\"sys\",\"pid\":5,\"call\":\"unlink\",\"path\":\"/etc/shadow\"}\n"
      "{\"ev\":\"expect\",\"decision\":\"deny\",\"reason\":\"SaclDeny\",\"outcome\":\"BadAddress\"}\n",
      sim);
  EXPECT_EQ(r.exit_code(), 0);
  EXPECT_EQ(r.expectations, 1u);
  ASSERT_EQ(r.decision_log.size(), 1u);
  EXPECT_EQ(r.decision_log[0], "1,5,unlink,0,0,deny,SaclDeny,0");
}

}  // namespace
}  // namespace ferify
