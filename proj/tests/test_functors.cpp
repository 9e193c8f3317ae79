#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "envforge/config.hpp"
#include "envforge/environment.hpp"
#include "envforge/error.hpp"
#include "support.hpp"

using namespace envforge;

namespace {

// Docking environment with an inline agent whose glues and rewards are given.
std::string inline_agent_env(const std::string& glues, const std::string& rewards, const std::string& dones = "") {
  return "simulator:\n  name: Docking1dSimulator\n"
         "platforms:\n  - name: deputy\n    init:\n      x0: {value: -10.0, unit: meter}\n"
         "      xdot0: {value: 0.0, unit: meter_per_second}\n"
         "agents:\n  - agent: deputy\n    platforms: [deputy]\n"
         "    parts:\n      - part: Sensor_Position\n      - part: Sensor_Velocity\n"
         "      - part: Controller_Force\n    policy: zero\n"
         "    glues:\n" +
         glues + "    rewards:\n" + rewards + (dones.empty() ? "" : "    dones:\n" + dones) + "horizon: 50\n";
}

const std::string kSensor =
    "      - functor: ObserveSensor\n        name: position\n        config: {sensor: Sensor_Position}\n";
// A wrapper and a reward that both carry an inline copy of the sensor glue.
const std::string kWrapper =
    "      - functor: TargetValueDifference\n        name: error\n"
    "        wrapped:\n          functor: ObserveSensor\n          config: {sensor: Sensor_Position}\n";
const std::string kReward =
    "      - functor: ExponentialDecayFromTargetValue\n        name: approach\n"
    "        wrapped:\n          functor: ObserveSensor\n          config: {sensor: Sensor_Position}\n"
    "        extractor: {key: direct_observation, index: 0}\n        config: {eps: 2.0, scale: 0.01}\n";

std::vector<GraphRoot> agent_roots(const EnvironmentConfig& env) {
  auto roots = graph_roots(env);
  roots.erase(std::remove_if(roots.begin(), roots.end(), [](const GraphRoot& r) { return r.agent.empty(); }),
              roots.end());
  return roots;
}

FunctorGraph compile(const EnvironmentConfig& env, const std::vector<GraphRoot>& roots) {
  return build_graph(roots, default_registries().functors, build_context(env, part_properties(env)));
}

FunctorSpec wrapper_of(const std::string& name, const std::string& ref) {
  FunctorSpec s;
  s.functor = "Wrapper";
  s.name = name;
  s.shape = WrapShape::single;
  s.wrapped.push_back(WrappedChild{"", ref, nullptr});
  s.path = "glues/" + name;
  return s;
}

}  // namespace

TEST_CASE("identical inline glues collapse into one node") {
  const auto env = testing::env_from_text(inline_agent_env(kSensor + kWrapper, kReward));
  const auto roots = agent_roots(env);
  REQUIRE(roots.size() == 3);
  const auto g = compile(env, roots);
  CHECK(g.size() == 3);
  // the wrapper's and the reward's child are the sensor root itself
  const auto sensor = g.roots()[0];
  CHECK(g.node(g.roots()[1]).children.at(0).second == sensor);
  CHECK(g.node(g.roots()[2]).children.at(0).second == sensor);

  auto doubled = roots;
  doubled.insert(doubled.end(), roots.begin(), roots.end());
  const auto g2 = compile(env, doubled);
  CHECK(g2.size() == g.size());
  for (std::size_t i = 0; i < roots.size(); ++i) CHECK(g2.roots()[i] == g2.roots()[i + roots.size()]);
}

TEST_CASE("node identity follows the structural key, not the display name") {
  const auto env = testing::env_from_text(inline_agent_env(kSensor + kWrapper, kReward));
  const auto a = compile(env, agent_roots(env));
  const auto b = compile(env, agent_roots(env));
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.node(i).id == b.node(i).id);
    CHECK(a.find(a.node(i).id) == i);
  }
  // a different config is a different node
  const auto env2 = testing::env_from_text(inline_agent_env(
      kSensor +
          "      - functor: ObserveSensor\n        name: scaled\n        config: {sensor: Sensor_Position, "
          "normalization: true}\n",
      "      - functor: ConstantStepReward\n"));
  CHECK(compile(env2, agent_roots(env2)).size() == 3);
}

TEST_CASE("schedule puts children first, then dones, then rewards") {
  const auto env = testing::docking_env();
  const auto g = compile(env, graph_roots(env));
  const auto& order = g.schedule();
  REQUIRE(order.size() == g.size());
  std::vector<std::size_t> position(g.size());
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (const auto& [role, child] : g.node(i).children) CHECK(position[child] < position[i]);
  }
  auto rank = [](FunctorKind k) { return k == FunctorKind::glue ? 0 : k == FunctorKind::reward ? 2 : 1; };
  for (std::size_t i = 1; i < order.size(); ++i) {
    CHECK(rank(g.node(order[i - 1]).kind) <= rank(g.node(order[i]).kind));
  }
}

TEST_CASE("cyclic wrapping is rejected") {
  const auto env = testing::docking_env();
  std::vector<GraphRoot> roots = {{FunctorKind::glue, wrapper_of("a", "b"), "deputy", "deputy"},
                                  {FunctorKind::glue, wrapper_of("b", "a"), "deputy", "deputy"}};
  try {
    compile(env, roots);
    FAIL("expected CycleDetected");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CycleDetected);
  }
  roots = {{FunctorKind::glue, wrapper_of("a", "a"), "deputy", "deputy"}};
  CHECK_THROWS_AS(compile(env, roots), Error);
}

TEST_CASE("unknown wrapped glue and unknown extractor key") {
  const auto env = testing::docking_env();
  std::vector<GraphRoot> roots = {{FunctorKind::glue, wrapper_of("a", "ghost"), "deputy", "deputy"}};
  try {
    compile(env, roots);
    FAIL("expected UnknownExtractorTarget");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownExtractorTarget);
  }

  const auto bad = parse_config(inline_agent_env(kSensor,
                                                 "      - functor: ExponentialDecayFromTargetValue\n"
                                                 "        wrapped: position\n        extractor: {key: speed}\n"
                                                 "        config: {eps: 1.0}\n"),
                                testing::config_dir() / "docking");
  const auto v = validate_environment(bad);
  REQUIRE_FALSE(v.report.ok());
  CHECK(v.report.errors.front().code == ErrorCode::UnknownExtractorTarget);
}

TEST_CASE("registry rejects additions once frozen") {
  FunctorRegistry r;
  register_builtin_functors(r);
  CHECK(r.find("ObserveSensor") != nullptr);
  CHECK(r.find("Nope") == nullptr);
  r.freeze();
  try {
    r.add("Extra", FunctorEntry{});
    FAIL("expected RegistryFrozen");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RegistryFrozen);
  }
}

TEST_CASE("target difference and exponential decay values") {
  auto env_cfg = testing::env_from_text(inline_agent_env(kSensor + kWrapper, kReward));
  Environment env(env_cfg);
  const auto first = env.reset(0);
  const auto& obs = first.observations.at("deputy");
  CHECK(obs.at("position/direct_observation").scalar() == -10.0);
  CHECK(obs.at("error/direct_observation").scalar() == 10.0);
  CHECK(obs.at("error/direct_observation").unit() == units::meter());

  const auto r1 = env.step(env.policy_actions(first));
  CHECK(r1.reward_components.at("deputy").at("approach") == doctest::Approx(0.01 * std::exp(-5.0)).epsilon(1e-14));
  // same distance again is not "farther"
  const auto r2 = env.step(env.policy_actions(r1));
  CHECK(r2.reward_components.at("deputy").at("approach") == r1.reward_components.at("deputy").at("approach"));
}

TEST_CASE("moving away scales the decay reward") {
  const std::string reward =
      "      - functor: ExponentialDecayFromTargetValue\n        name: approach\n        wrapped: position\n"
      "        config: {eps: 2.0, scale: 1.0, reward_when_farther: 0.5}\n";
  auto text = inline_agent_env(kSensor, reward);
  text.replace(text.find("xdot0: {value: 0.0"), 18, "xdot0: {value: -1.0");
  Environment env(testing::env_from_text(text));
  auto r = env.reset(0);
  r = env.step(env.policy_actions(r));
  CHECK(r.reward_components.at("deputy").at("approach") == doctest::Approx(std::exp(-11.0 / 2.0)));
  r = env.step(env.policy_actions(r));
  CHECK(r.reward_components.at("deputy").at("approach") == doctest::Approx(0.5 * std::exp(-12.0 / 2.0)));
}

TEST_CASE("docking dones classify arrival speed") {
  // zero thrust: arrival speed decides the outcome
  auto run = [](double x0, double v0) {
    Environment env(testing::env_from_text(testing::docking_text(x0, v0)),
                    EnvironmentOptions{std::string("zero"), nlohmann::json::object()});
    return run_episode(env, 1);
  };
  const auto slow = run(-1.05, 0.1);
  REQUIRE(slow.outcome.at("deputy").has_value());
  CHECK(slow.outcome.at("deputy")->code == DoneStatusCode::WIN);
  CHECK(slow.steps == 10);
  const auto fast = run(-2.0, 0.5);
  REQUIRE(fast.outcome.at("deputy").has_value());
  CHECK(fast.outcome.at("deputy")->code == DoneStatusCode::LOSS);
  CHECK(fast.outcome.at("deputy")->source == "crashed");
}
