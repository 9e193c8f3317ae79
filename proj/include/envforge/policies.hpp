#pragma once

// Policy contract and the reference policies: uniform random, scripted rules
// over named observations, and replay of recorded actions.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "envforge/functors.hpp"
#include "envforge/parts.hpp"
#include "envforge/schema.hpp"
#include "json.hpp"

namespace envforge {

/// Agent observation, keyed "<glue name>/<key>".
using AgentObservation = std::map<std::string, Quantity>;
/// Controller glue name -> action box.
using ActionSpace = std::map<std::string, Box>;
using Action = std::map<std::string, Quantity>;

class Policy {
 public:
  virtual ~Policy() = default;

  /// Counts calls, then defers to compute_action.
  Action act(const AgentObservation& observation, const ActionSpace& space, std::uint64_t seed);
  virtual void reset() {}

  std::size_t calls() const noexcept { return calls_; }

 protected:
  virtual Action compute_action(const AgentObservation& observation, const ActionSpace& space,
                                std::uint64_t seed) = 0;

 private:
  std::size_t calls_ = 0;
};

/// Uniform per element; unbounded sides are limited to [-1, 1].
class RandomPolicy : public Policy {
 protected:
  Action compute_action(const AgentObservation&, const ActionSpace& space, std::uint64_t seed) override;
};

using ScriptedRule =
    std::function<Action(const AgentObservation&, const ActionSpace&, const nlohmann::json& params)>;

/// Registered rule names: "zero", "scripted_dock".
const std::map<std::string, ScriptedRule>& scripted_rules();

class ScriptedPolicy : public Policy {
 public:
  /// Throws Error(InvalidValue) for an unknown rule.
  ScriptedPolicy(const std::string& rule, nlohmann::json params = nlohmann::json::object());

 protected:
  Action compute_action(const AgentObservation& observation, const ActionSpace& space,
                        std::uint64_t seed) override;

 private:
  ScriptedRule rule_;
  nlohmann::json params_;
};

/// Plays back a per-step list of actions; past the end it commands zeros
/// (the clamp of zero into each action box).
class ReplayPolicy : public Policy {
 public:
  explicit ReplayPolicy(std::vector<Action> actions);
  /// Reads the step records of an artifact file for one agent.
  static std::unique_ptr<ReplayPolicy> from_artifact(const std::string& path, const std::string& agent);

  void reset() override { cursor_ = 0; }

 protected:
  Action compute_action(const AgentObservation&, const ActionSpace& space, std::uint64_t seed) override;

 private:
  std::vector<Action> actions_;
  std::size_t cursor_ = 0;
};

/// The bang-bang docking rule: tracks an approach speed proportional to the
/// distance to the origin, bounded by [min_speed, max_speed], with full
/// positive or negative thrust.
struct DockingRuleParams {
  std::string position = "position/direct_observation";
  std::string velocity = "velocity/direct_observation";
  std::string action;        // controller glue name; the only one when empty
  double gain = 0.1;         // 1/s
  double min_speed = 0.05;   // m/s
  double max_speed = 1.0;    // m/s

  static DockingRuleParams from_json(const nlohmann::json& j);
};

/// +max_thrust when slower than the speed profile toward the origin, else -max_thrust.
double docking_rule_thrust(double position, double velocity, double max_thrust,
                           const DockingRuleParams& params) noexcept;

struct PolicyEntry {
  Schema schema;
  std::function<std::shared_ptr<Policy>(const nlohmann::json& config, const std::string& agent)> factory;
};

class PolicyRegistry {
 public:
  void add(const std::string& name, PolicyEntry entry);
  const PolicyEntry* find(const std::string& name) const;
  std::vector<std::string> names() const;
  /// Throws Error(InvalidValue) for an unknown name.
  std::shared_ptr<Policy> create(const std::string& name, const nlohmann::json& config,
                                 const std::string& agent) const;

 private:
  std::map<std::string, PolicyEntry> entries_;
};

/// random, scripted, replay, and the rule shorthands zero and scripted_dock.
void register_builtin_policies(PolicyRegistry& registry);

}  // namespace envforge
