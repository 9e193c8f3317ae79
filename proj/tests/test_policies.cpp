#include "doctest.h"

#include <chrono>

#include "envforge/config.hpp"
#include "envforge/environment.hpp"
#include "envforge/error.hpp"
#include "envforge/evaluation.hpp"
#include "envforge/policies.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace envforge;

TEST_CASE("random actions stay inside bounded and unbounded boxes") {
  RandomPolicy policy;
  const ActionSpace space = {{"thrust", Box::uniform(1, -1.0, 1.0, units::newton())},
                             {"free", Box::unbounded(2, units::none())},
                             {"wide", Box{{-5.0, 0.0}, {5.0, 0.5}, units::meter()}}};
  double lo = 1, hi = -1;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const Action a = policy.act({}, space, s);
    REQUIRE(a.size() == 3);
    for (const auto& [name, q] : a) REQUIRE(space.at(name).contains(q));
    for (double v : a.at("free").values()) REQUIRE((v >= -1.0 && v <= 1.0));
    lo = std::min(lo, a.at("thrust").scalar());
    hi = std::max(hi, a.at("thrust").scalar());
  }
  CHECK(lo < -0.99);
  CHECK(hi > 0.99);
  CHECK(policy.calls() == 10000);
  CHECK(policy.act({}, space, 5) == policy.act({}, space, 5));
}

TEST_CASE("docking rule") {
  DockingRuleParams p;
  // slower than the approach profile: push toward the origin
  CHECK(docking_rule_thrust(-10.0, 0.0, 1.0, p) == 1.0);
  CHECK(docking_rule_thrust(10.0, 0.0, 1.0, p) == -1.0);
  // faster than the profile: brake
  CHECK(docking_rule_thrust(-1.0, 0.5, 1.0, p) == -1.0);
  CHECK(docking_rule_thrust(-100.0, 1.2, 1.0, p) == -1.0);
  CHECK(docking_rule_thrust(-0.1, 0.01, 2.0, p) == 2.0);
}

TEST_CASE("scripted docking matches the exact closed-loop reference") {
  struct Case {
    double x0, v0;
    std::int64_t x240, v240;
    int steps;
  };
  // expected step counts are frozen from the integer reference
  const Case cases[] = {{-10.0, 0.0, -2400, 0, 42}, {-3.0, 0.0, -720, 0, 30}, {6.0, 0.5, 1440, 120, 44}};
  for (const auto& c : cases) {
    const auto ref = oracle::docking_closed_loop(c.x240, c.v240, 2000);
    REQUIRE(ref.code == "WIN");
    REQUIRE(ref.steps == c.steps);
    Environment env(testing::env_from_text(testing::docking_text(c.x0, c.v0)));
    const auto t0 = std::chrono::steady_clock::now();
    const auto summary = run_episode(env, 7);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 5.0);
    REQUIRE(summary.outcome.at("deputy").has_value());
    CHECK(std::string(to_string(summary.outcome.at("deputy")->code)) == ref.code);
    CHECK(summary.steps == static_cast<std::size_t>(ref.steps));
  }
}

TEST_CASE("registry builds policies by name") {
  const auto& regs = default_registries();
  CHECK(regs.policies.create("random", {}, "a") != nullptr);
  CHECK(regs.policies.create("zero", {}, "a") != nullptr);
  try {
    regs.policies.create("telepathy", {}, "a");
    FAIL("expected InvalidValue");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidValue);
  }
  CHECK_THROWS_AS(ScriptedPolicy("no_such_rule"), Error);
}

TEST_CASE("zero rule commands the clamp of zero") {
  ScriptedPolicy zero("zero");
  const ActionSpace space = {{"push", Box::uniform(1, -10.0, 10.0, units::newton())},
                             {"lift", Box::uniform(1, 1.0, 2.0, units::newton())}};
  const Action a = zero.act({}, space, 0);
  CHECK(a.at("push").scalar() == 0.0);
  CHECK(a.at("lift").scalar() == 1.0);
}

TEST_CASE("replaying an artifact reproduces the episode") {
  const auto env_cfg = testing::env_from_text(testing::docking_text(-7.0, 0.1));
  TestCase tc{"orig", {}, std::nullopt, 11};
  const auto original = rollout_case(env_cfg, tc, {});
  const auto dir = testing::scratch("replay");
  write_artifact(original, dir / "orig.jsonl");

  EvaluationOptions replay;
  replay.policy = "replay";
  replay.policy_config = {{"artifact", (dir / "orig.jsonl").string()}};
  const auto again = rollout_case(env_cfg, tc, replay);
  REQUIRE(again.steps.size() == original.steps.size());
  for (std::size_t i = 0; i < again.steps.size(); ++i) {
    CHECK(again.steps[i].actions == original.steps[i].actions);
    CHECK(again.steps[i].platform_states == original.steps[i].platform_states);
  }
  CHECK(again.outcome == original.outcome);

  ReplayPolicy short_list({{{"thrust", Quantity(1.0, units::newton())}}});
  const ActionSpace space = {{"thrust", Box::uniform(1, -1.0, 1.0, units::newton())}};
  CHECK(short_list.act({}, space, 0).at("thrust").scalar() == 1.0);
  CHECK(short_list.act({}, space, 0).at("thrust").scalar() == 0.0);
  short_list.reset();
  CHECK(short_list.act({}, space, 0).at("thrust").scalar() == 1.0);
  CHECK_THROWS_AS(ReplayPolicy::from_artifact((dir / "missing.jsonl").string(), "deputy"), Error);
}
