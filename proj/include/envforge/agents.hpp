#pragma once

// An agent: its platforms, the compiled glue/done/reward nodes it owns, its
// observation and action spaces, and the policy that drives it.

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "envforge/config.hpp"
#include "envforge/functors.hpp"
#include "envforge/policies.hpp"

namespace envforge {

struct Agent {
  std::string name;
  bool trainable = true;
  std::vector<std::string> platforms;
  /// (display name, graph node), in config order.
  std::vector<std::pair<std::string, std::size_t>> glues;
  std::vector<std::pair<std::string, std::size_t>> dones;
  std::vector<std::pair<std::string, std::size_t>> rewards;
  ObservationSpace observation_space;  // "<glue>/<key>"
  ActionSpace action_space;            // controller glue name
  std::string policy_handle;
  std::shared_ptr<Policy> policy;

  /// Collects this step's glue outputs under "<glue>/<key>".
  AgentObservation observe(const EpisodeState& state) const;
};

/// Wires an agent onto the compiled graph. `first_root` is the index into
/// graph.roots() of the agent's first glue (roots follow graph_roots order).
/// Throws Error(PartBindingError) when a part's platform is not one of the
/// agent's, and Error(InvalidValue) for duplicate glue names.
Agent build_agent(const AgentConfig& config, const FunctorGraph& graph, std::size_t first_root,
                  const std::map<std::pair<std::string, std::string>, PartProperty>& parts);

}  // namespace envforge
