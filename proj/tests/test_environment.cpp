#include "doctest.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "envforge/environment.hpp"
#include "envforge/error.hpp"
#include "support.hpp"

using namespace envforge;

namespace {

EnvironmentOptions zero_policy() { return EnvironmentOptions{std::string("zero"), nlohmann::json::object()}; }

std::string racer(const std::string& name, double finish, const std::string& status) {
  return "  - agent: " + name + "\n    platforms: [p" + name +
         "]\n    parts:\n      - part: Sensor_Position\n    policy: zero\n"
         "    glues:\n      - functor: ObserveSensor\n        name: position\n        config: {sensor: Sensor_Position}\n"
         "    dones:\n      - functor: StateBounds\n        name: finish\n        config:\n"
         "          status: " +
         status + "\n          bounds:\n            - state: position\n              high: {value: " +
         std::to_string(finish) + ", unit: meter}\n" +
         "    rewards:\n      - functor: ConstantStepReward\n        name: alive\n";
}

// Two agents moving at 1 m/s that finish after 3 and 6 steps.
std::string race(const std::string& end_mode) {
  std::string platforms;
  for (const char* p : {"pa", "pb"}) {
    platforms += std::string("  - name: ") + p +
                 "\n    init:\n      x0: {value: 0.0, unit: meter}\n      xdot0: {value: 1.0, unit: meter_per_second}\n";
  }
  return "simulator:\n  name: Docking1dSimulator\nplatforms:\n" + platforms + "agents:\n" +
         racer("a", 2.5, "WIN") + racer("b", 5.5, "LOSS") + "horizon: 100\nepisode_end_mode: " + end_mode + "\n";
}

}  // namespace

TEST_CASE("per-step schedule: dones before rewards, totals equal component sums") {
  Environment env(testing::env_from_text(testing::docking_text(-500.0, 0.0)), zero_policy());
  std::vector<TraceEvent> events;
  env.set_trace([&](const TraceEvent& e) { events.push_back(e); });
  auto r = env.reset(3);
  for (int i = 0; i < 100; ++i) {
    r = env.step(env.policy_actions(r));
    double sum = 0.0;
    for (const auto& [name, v] : r.reward_components.at("deputy")) sum += v;
    REQUIRE(r.rewards.at("deputy") == sum);
    REQUIRE(r.reward_components.at("deputy").size() == 3);
  }
  REQUIRE_FALSE(r.episode_done);

  const std::vector<TracePhase> phase_order = {TracePhase::apply_action, TracePhase::sim_step, TracePhase::observe,
                                               TracePhase::done,         TracePhase::reward,   TracePhase::end_policy,
                                               TracePhase::space_check};
  auto rank = [&](TracePhase p) { return std::find(phase_order.begin(), phase_order.end(), p) - phase_order.begin(); };
  std::size_t done_events = 0, reward_events = 0;
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].phase == TracePhase::done) ++done_events;
    if (events[i].phase == TracePhase::reward) ++reward_events;
    // actions for the next step are applied before its counter advances
    if (events[i].phase == TracePhase::apply_action) continue;
    if (events[i].step != events[i - 1].step || events[i - 1].phase == TracePhase::reset) continue;
    REQUIRE(rank(events[i - 1].phase) <= rank(events[i].phase));
  }
  // two agent dones plus the horizon, three rewards
  CHECK(done_events == 300);
  CHECK(reward_events == 300);
  CHECK(events.front().phase == TracePhase::reset);
}

TEST_CASE("horizon truncates with DRAW") {
  Environment env(testing::env_from_text(testing::docking_text(-500.0, 0.0, 25)), zero_policy());
  const auto s = run_episode(env, 1);
  CHECK(s.steps == 25);
  CHECK(s.truncated);
  REQUIRE(s.outcome.at("deputy").has_value());
  CHECK(s.outcome.at("deputy")->code == DoneStatusCode::DRAW);
  CHECK(s.outcome.at("deputy")->truncated);
  env.set_horizon(4);
  CHECK(run_episode(env, 1).steps == 4);
}

TEST_CASE("stepping a finished episode is an error") {
  Environment env(testing::env_from_text(testing::docking_text(-500.0, 0.0, 2)), zero_policy());
  try {
    env.step({});
    FAIL("expected EpisodeAlreadyDone");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EpisodeAlreadyDone);
  }
  auto r = env.reset(0);
  r = env.step(env.policy_actions(r));
  r = env.step(env.policy_actions(r));
  CHECK(r.episode_done);
  CHECK_THROWS_AS(env.step({}), Error);
  CHECK_NOTHROW(env.reset(0));
}

TEST_CASE("all_agents_done waits for every agent") {
  Environment env(testing::env_from_text(race("all_agents_done")));
  auto r = env.reset(0);
  std::size_t steps = 0;
  bool a_seen_done = false;
  while (!r.episode_done) {
    r = env.step(env.policy_actions(r));
    ++steps;
    if (steps == 3) {
      CHECK(r.dones.at("a"));
      CHECK(r.status.at("a").code == DoneStatusCode::WIN);
      CHECK_FALSE(r.dones.at("b"));
      a_seen_done = true;
    }
    if (steps > 3) CHECK(r.observations.count("a") == 0);
  }
  CHECK(a_seen_done);
  CHECK(steps == 6);
  CHECK(r.status.at("b").code == DoneStatusCode::LOSS);
}

TEST_CASE("any_agent_done ends on the first done") {
  Environment env(testing::env_from_text(race("any_agent_done")));
  const auto s = run_episode(env, 0);
  CHECK(s.steps == 3);
  CHECK(s.outcome.at("a")->code == DoneStatusCode::WIN);
  CHECK_FALSE(s.outcome.at("b").has_value());
}

TEST_CASE("observations leaving their space raise SpaceViolation") {
  const std::string agent =
      "agents:\n  - agent: pole\n    platforms: [cartpole]\n    parts:\n      - part: Sensor_State\n"
      "    policy: zero\n    glues:\n      - functor: TargetValueDifference\n        name: offset\n"
      "        wrapped:\n          functor: ObserveSensor\n          config: {sensor: Sensor_State}\n"
      "        config:\n          index: 0\n          limit: {minimum: -0.001, maximum: 0.001}\n"
      "    rewards:\n      - functor: ConstantStepReward\n";
  auto text = [&](const std::string& mode) {
    return "simulator: CartPoleSimulator\nplatforms:\n  - name: cartpole\n    init:\n"
           "      x0: {value: 0.5, unit: meter}\n" +
           agent + "horizon: 10\nspace_check_mode: " + mode + "\n";
  };
  {
    Environment env(testing::env_from_text(text("every_step")));
    try {
      env.reset(0);
      FAIL("expected SpaceViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SpaceViolation);
      CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
  }
  {
    Environment env(testing::env_from_text(text("off")));
    CHECK(run_episode(env, 0).steps == 10);
    CHECK(env.space_checks() == 0);
  }
}

TEST_CASE("spot checks fire at the configured rate") {
  Environment env(testing::env_from_text(testing::docking_text(-1e6, 0.0, 10000, "space_check_mode: {spot_check: 0.01}\n")),
                  zero_policy());
  const auto s = run_episode(env, 99);
  REQUIRE(s.steps == 10000);
  const double p = 0.01, n = 10000;
  const double band = 3.0 * std::sqrt(p * (1 - p) / n);
  CHECK(std::fabs(env.space_checks() / n - p) <= band);
  CHECK(env.space_checks() > 0);
}

TEST_CASE("reset is deterministic in the seed") {
  Environment env(testing::docking_env());
  const auto a = env.reset(5).observations;
  const auto pa = env.sampled();
  const auto b = env.reset(5).observations;
  CHECK(a == b);
  CHECK(env.sampled() == pa);
  env.reset(6);
  CHECK_FALSE(env.sampled() == pa);
  const double x0 = pa.at("deputy/x0").scalar();
  CHECK((x0 >= -12.0 && x0 <= -8.0));
  // the agent's store publishes its sampled constants
  CHECK(env.references().lookup("deputy/dock_radius").scalar() == 0.1);
}

TEST_CASE("policy override replaces configured policies") {
  Environment env(testing::docking_env(), zero_policy());
  auto r = env.reset(0);
  const auto actions = env.policy_actions(r);
  CHECK(actions.at("deputy").at("thrust").scalar() == 0.0);
}

TEST_CASE("episode CSV and run config") {
  Environment env(testing::docking_env());
  run_episode(env, 4);
  const auto dir = testing::scratch("env_csv");
  env.write_episode_csv(dir / "ep.csv");
  std::ifstream in(dir / "ep.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header.find("reward:deputy/approach") != std::string::npos);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == env.episode_log().rows.size());
  CHECK(env.run_config().contains("config"));
  CHECK_THROWS_AS(env.write_episode_csv(dir / "missing" / "x" / "ep.csv"), Error);
}

TEST_CASE("curriculum updaters move the sampled range") {
  Environment env(testing::env_from_text(
      "simulator: CartPoleSimulator\nplatforms:\n  - name: cartpole\n    init:\n      x0:\n"
      "        distribution: {kind: uniform, low: 0.0, high: 0.1}\n        unit: meter\n"
      "        updaters:\n          - {target: low, kind: increment, step: 0.5, limit: 0.5}\n"
      "          - {target: high, kind: increment, step: 0.5, limit: 0.6}\n"
      "agents:\n  - agent.yml\nhorizon: 5\n",
      testing::config_dir() / "cartpole"));
  env.reset(1);
  CHECK(env.sampled().at("cartpole/x0").scalar() <= 0.1);
  env.apply_training_result({});
  env.reset(1);
  CHECK(env.sampled().at("cartpole/x0").scalar() >= 0.5);
  CHECK(env.sampled().at("cartpole/x0").scalar() <= 0.6);
}
