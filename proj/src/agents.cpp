#include "envforge/agents.hpp"

#include <algorithm>
#include <set>

#include "envforge/error.hpp"

namespace envforge {

AgentObservation Agent::observe(const EpisodeState& state) const {
  AgentObservation out;
  for (const auto& [name, node] : glues) {
    for (const auto& [key, q] : state.output(node)) out.emplace(name + "/" + key, q);
  }
  return out;
}

Agent build_agent(const AgentConfig& config, const FunctorGraph& graph, std::size_t first_root,
                  const std::map<std::pair<std::string, std::string>, PartProperty>& parts) {
  Agent a;
  a.name = config.name;
  a.trainable = config.trainable;
  a.platforms = config.platforms;
  a.policy_handle = config.policy.handle.empty() ? config.name : config.policy.handle;

  for (const auto& p : config.parts) {
    if (std::find(a.platforms.begin(), a.platforms.end(), p.platform) == a.platforms.end() ||
        !parts.count({p.platform, p.name})) {
      throw Error(ErrorCode::PartBindingError,
                  "agent '" + a.name + "': part '" + p.name + "' is not on any of its platforms");
    }
  }

  const auto& roots = graph.roots();
  std::size_t r = first_root;
  auto take = [&](const std::vector<FunctorSpec>& specs, std::vector<std::pair<std::string, std::size_t>>& into) {
    for (const auto& s : specs) {
      if (r >= roots.size()) throw std::logic_error("graph has fewer roots than agent specs");
      into.emplace_back(default_functor_name(s), roots[r++]);
    }
  };
  take(config.glues, a.glues);
  take(config.dones, a.dones);
  take(config.rewards, a.rewards);

  std::set<std::string> seen;
  for (const auto& [name, node] : a.glues) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::InvalidValue, "agent '" + a.name + "' has two glues named '" + name + "'");
    }
    const Glue* g = graph.node(node).glue();
    for (const auto& [key, box] : g->observation_space()) a.observation_space.emplace(name + "/" + key, box);
    if (auto space = g->action_space()) a.action_space.emplace(name, *space);
  }
  seen.clear();
  for (const auto& [name, node] : a.rewards) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::InvalidValue, "agent '" + a.name + "' has two rewards named '" + name + "'");
    }
  }
  return a;
}

}  // namespace envforge
