#pragma once

// Multi-agent environment: samples the episode parameters, resets the
// simulator, and runs the per-step schedule
//   actions -> simulator step -> glues -> dones -> rewards -> end policy -> space check.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "envforge/agents.hpp"
#include "envforge/config.hpp"
#include "envforge/epp.hpp"
#include "envforge/functors.hpp"
#include "envforge/policies.hpp"
#include "envforge/simulators.hpp"
#include "json.hpp"

namespace envforge {

struct StepResult {
  std::map<std::string, AgentObservation> observations;
  std::map<std::string, double> rewards;                               // sum of components
  std::map<std::string, std::map<std::string, double>> reward_components;
  std::map<std::string, bool> dones;
  /// Status of agents whose done fired this step. Agents closed by
  /// any_agent_done without a done of their own have no entry.
  std::map<std::string, DoneResult> status;
  bool episode_done = false;
  bool truncated = false;
};

enum class TracePhase { reset, apply_action, sim_step, observe, done, reward, end_policy, space_check };
std::string_view to_string(TracePhase phase) noexcept;

struct TraceEvent {
  std::size_t step;
  TracePhase phase;
  std::string subject;  // node name, agent, or empty
};

using TraceListener = std::function<void(const TraceEvent&)>;

/// One CSV row per step.
struct EpisodeRow {
  std::size_t step = 0;
  std::map<std::string, double> rewards;      // "<agent>/<component>"
  std::map<std::string, std::string> dones;   // "<agent>" -> code or ""
  bool truncated = false;
};

struct EpisodeLog {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  SampledParameters parameters;
  std::vector<EpisodeRow> rows;
};

struct EnvironmentOptions {
  /// Replaces every agent's configured policy when set.
  std::optional<std::string> policy_override;
  nlohmann::json policy_override_config = nlohmann::json::object();
};

class Environment {
 public:
  explicit Environment(EnvironmentConfig config, EnvironmentOptions options = {},
                       const Registries& registries = default_registries());

  const EnvironmentConfig& config() const noexcept { return config_; }
  const std::vector<Agent>& agents() const noexcept { return agents_; }
  const Agent& agent(const std::string& name) const;
  const FunctorGraph& graph() const noexcept { return graph_; }
  const Simulator& simulator() const noexcept { return *sim_; }
  Simulator& simulator() noexcept { return *sim_; }
  EpisodeParameterProvider& provider() noexcept { return epp_; }
  const EpisodeParameterProvider& provider() const noexcept { return epp_; }
  const ReferenceStore& references() const noexcept { return store_; }
  const SampledParameters& sampled() const noexcept { return sampled_; }
  const EpisodeState& state() const noexcept { return state_; }

  std::size_t step_count() const noexcept { return state_.step; }
  std::size_t episodes_started() const noexcept { return episodes_; }
  bool episode_done() const noexcept { return episode_done_; }
  bool agent_done(const std::string& agent) const { return done_.count(agent) != 0; }
  std::size_t horizon() const noexcept { return horizon_; }
  /// Overrides the horizon for subsequent episodes (evaluation test cases).
  void set_horizon(std::size_t horizon);

  std::size_t space_checks() const noexcept { return space_checks_; }
  void set_trace(TraceListener listener) { trace_ = std::move(listener); }

  /// Samples parameters with `seed`, resets the simulator and functors, and
  /// returns the initial observations (rewards zero, nobody done).
  StepResult reset(std::uint64_t seed);
  /// Throws Error(EpisodeAlreadyDone) and Error(SpaceViolation).
  StepResult step(const std::map<std::string, Action>& actions);

  /// Asks each live agent's policy for an action.
  std::map<std::string, Action> policy_actions(const StepResult& last);

  /// Fires the curriculum updaters and records the provider state.
  void apply_training_result(const nlohmann::json& result);

  const EpisodeLog& episode_log() const noexcept { return log_; }
  /// Throws Error(IoError).
  void write_episode_csv(const std::filesystem::path& path) const;
  /// Resolved config tree plus the provider state per iteration.
  nlohmann::json run_config() const;

 private:
  void emit(TracePhase phase, const std::string& subject = {});
  void evaluate_glues();
  void check_spaces(const StepResult& result);
  PartBinder binder();

  EnvironmentConfig config_;
  const Registries* registries_;
  std::unique_ptr<Simulator> sim_;
  EpisodeParameterProvider epp_;
  ReferenceStore store_;
  std::map<std::pair<std::string, std::string>, PartProperty> part_properties_;
  FunctorGraph graph_;
  std::vector<Agent> agents_;
  std::map<std::string, std::shared_ptr<Policy>> policies_;  // by handle
  std::vector<std::size_t> shared_dones_;                     // graph nodes

  EpisodeState state_;
  SampledParameters sampled_;
  std::size_t horizon_;
  std::size_t episodes_ = 0;
  bool started_ = false;
  bool episode_done_ = false;
  std::map<std::string, DoneResult> done_;
  std::set<std::string> closed_;  // done agents that no longer receive results
  Rng spot_rng_{0};
  std::size_t space_checks_ = 0;
  TraceListener trace_;
  EpisodeLog log_;
  std::vector<nlohmann::json> provider_history_;
};

/// Result of running one episode with the agents' policies.
struct EpisodeSummary {
  std::size_t steps = 0;
  std::map<std::string, double> total_reward;
  std::map<std::string, std::optional<DoneResult>> outcome;
  bool truncated = false;
};

/// Per-step callback: the actions sent and the step's result.
using StepObserver = std::function<void(const std::map<std::string, Action>&, const StepResult&)>;

EpisodeSummary run_episode(Environment& env, std::uint64_t seed, const StepObserver& observer = {});

}  // namespace envforge
