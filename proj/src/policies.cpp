#include "envforge/policies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "envforge/error.hpp"
#include "envforge/rng.hpp"

namespace envforge {

Action Policy::act(const AgentObservation& observation, const ActionSpace& space, std::uint64_t seed) {
  ++calls_;
  return compute_action(observation, space, seed);
}

Action RandomPolicy::compute_action(const AgentObservation&, const ActionSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  Action out;
  for (const auto& [name, box] : space) {
    std::vector<double> v(box.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double lo = std::isfinite(box.low[i]) ? box.low[i] : std::min(-1.0, box.high[i]);
      const double hi = std::isfinite(box.high[i]) ? box.high[i] : std::max(1.0, lo);
      v[i] = rng.uniform(lo, hi);
    }
    out.emplace(name, Quantity(std::move(v), box.unit));
  }
  return out;
}

namespace {

Quantity zero_in(const Box& box) {
  return box.clamp(Quantity(std::vector<double>(box.size(), 0.0), box.unit));
}

Action zero_rule(const AgentObservation&, const ActionSpace& space, const nlohmann::json&) {
  Action out;
  for (const auto& [name, box] : space) out.emplace(name, zero_in(box));
  return out;
}

double observed(const AgentObservation& obs, const std::string& key, Unit unit) {
  auto it = obs.find(key);
  if (it == obs.end()) {
    throw Error(ErrorCode::InvalidValue, "scripted rule needs observation '" + key + "'");
  }
  return convert(it->second, unit)[0];
}

Action dock_rule(const AgentObservation& obs, const ActionSpace& space, const nlohmann::json& params) {
  const DockingRuleParams p = DockingRuleParams::from_json(params);
  std::string glue = p.action;
  if (glue.empty()) {
    if (space.size() != 1) {
      throw Error(ErrorCode::InvalidValue, "scripted_dock needs 'action' when the agent has several controllers");
    }
    glue = space.begin()->first;
  }
  auto it = space.find(glue);
  if (it == space.end()) throw Error(ErrorCode::InvalidValue, "scripted_dock: no action glue '" + glue + "'");
  const Box& box = it->second;
  const double max_thrust = convert_value(box.high.at(0), box.unit, units::newton());
  const double x = observed(obs, p.position, units::meter());
  const double v = observed(obs, p.velocity, units::meter_per_second());
  const double thrust = docking_rule_thrust(x, v, max_thrust, p);
  Action out = zero_rule(obs, space, params);
  out.insert_or_assign(glue, box.clamp(Quantity(convert_value(thrust, units::newton(), box.unit), box.unit)));
  return out;
}

}  // namespace

DockingRuleParams DockingRuleParams::from_json(const nlohmann::json& j) {
  DockingRuleParams p;
  if (!j.is_object()) return p;
  p.position = j.value("position", p.position);
  p.velocity = j.value("velocity", p.velocity);
  p.action = j.value("action", p.action);
  p.gain = j.value("gain", p.gain);
  p.min_speed = j.value("min_speed", p.min_speed);
  p.max_speed = j.value("max_speed", p.max_speed);
  return p;
}

double docking_rule_thrust(double position, double velocity, double max_thrust,
                           const DockingRuleParams& p) noexcept {
  const double speed = std::clamp(p.gain * std::abs(position), p.min_speed, p.max_speed);
  const double desired = position < 0.0 ? speed : -speed;
  return velocity < desired ? max_thrust : -max_thrust;
}

const std::map<std::string, ScriptedRule>& scripted_rules() {
  static const std::map<std::string, ScriptedRule> rules = {
      {"zero", zero_rule},
      {"scripted_dock", dock_rule},
  };
  return rules;
}

ScriptedPolicy::ScriptedPolicy(const std::string& rule, nlohmann::json params) : params_(std::move(params)) {
  auto it = scripted_rules().find(rule);
  if (it == scripted_rules().end()) throw Error(ErrorCode::InvalidValue, "unknown scripted rule '" + rule + "'");
  rule_ = it->second;
}

Action ScriptedPolicy::compute_action(const AgentObservation& observation, const ActionSpace& space,
                                      std::uint64_t) {
  return rule_(observation, space, params_);
}

ReplayPolicy::ReplayPolicy(std::vector<Action> actions) : actions_(std::move(actions)) {}

std::unique_ptr<ReplayPolicy> ReplayPolicy::from_artifact(const std::string& path, const std::string& agent) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read artifact '" + path + "'");
  std::vector<Action> actions;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) throw Error(ErrorCode::IoError, "malformed artifact line in '" + path + "'");
    if (rec.value("type", "") != "step") continue;
    Action a;
    if (rec.contains("actions") && rec["actions"].contains(agent)) {
      for (const auto& [glue, q] : rec["actions"][agent].items()) a.emplace(glue, quantity_from_json(q));
    }
    actions.push_back(std::move(a));
  }
  return std::make_unique<ReplayPolicy>(std::move(actions));
}

Action ReplayPolicy::compute_action(const AgentObservation&, const ActionSpace& space, std::uint64_t) {
  Action out;
  const Action* recorded = cursor_ < actions_.size() ? &actions_[cursor_] : nullptr;
  ++cursor_;
  for (const auto& [name, box] : space) {
    if (recorded) {
      if (auto it = recorded->find(name); it != recorded->end()) {
        out.emplace(name, box.clamp(it->second));
        continue;
      }
    }
    out.emplace(name, zero_in(box));
  }
  return out;
}

// ---------------------------------------------------------------------------

void PolicyRegistry::add(const std::string& name, PolicyEntry entry) {
  entries_.insert_or_assign(name, std::move(entry));
}

const PolicyEntry* PolicyRegistry::find(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> PolicyRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, e] : entries_) out.push_back(n);
  return out;
}

std::shared_ptr<Policy> PolicyRegistry::create(const std::string& name, const nlohmann::json& config,
                                               const std::string& agent) const {
  const PolicyEntry* e = find(name);
  if (!e) throw Error(ErrorCode::InvalidValue, "unknown policy '" + name + "'");
  return e->factory(apply_defaults(e->schema, config), agent);
}

void register_builtin_policies(PolicyRegistry& r) {
  auto str = [](const char* n, bool required = false) {
    ParamSchema p;
    p.name = n;
    p.kind = ParamKind::string;
    p.required = required;
    return p;
  };
  auto num = [](const char* n) {
    ParamSchema p;
    p.name = n;
    p.kind = ParamKind::number;
    return p;
  };
  const Schema dock = {str("position"), str("velocity"), str("action"), num("gain"), num("min_speed"),
                       num("max_speed")};

  r.add("random", {{}, [](const nlohmann::json&, const std::string&) -> std::shared_ptr<Policy> {
                     return std::make_shared<RandomPolicy>();
                   }});
  {
    Schema s = dock;
    s.insert(s.begin(), str("rule", true));
    r.add("scripted", {s, [](const nlohmann::json& c, const std::string&) -> std::shared_ptr<Policy> {
                         nlohmann::json params = c;
                         params.erase("rule");
                         return std::make_shared<ScriptedPolicy>(c.at("rule").get<std::string>(), params);
                       }});
  }
  r.add("zero", {{}, [](const nlohmann::json& c, const std::string&) -> std::shared_ptr<Policy> {
                   return std::make_shared<ScriptedPolicy>("zero", c);
                 }});
  r.add("scripted_dock", {dock, [](const nlohmann::json& c, const std::string&) -> std::shared_ptr<Policy> {
                            return std::make_shared<ScriptedPolicy>("scripted_dock", c);
                          }});
  r.add("replay", {{str("artifact", true), str("agent")},
                   [](const nlohmann::json& c, const std::string& agent) -> std::shared_ptr<Policy> {
                     return ReplayPolicy::from_artifact(c.at("artifact").get<std::string>(),
                                                        c.value("agent", agent));
                   }});
}

}  // namespace envforge
