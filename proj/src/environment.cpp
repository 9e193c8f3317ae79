#include "envforge/environment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "envforge/error.hpp"
#include "envforge/rng.hpp"

namespace envforge {

std::string_view to_string(TracePhase phase) noexcept {
  switch (phase) {
    case TracePhase::reset: return "reset";
    case TracePhase::apply_action: return "apply_action";
    case TracePhase::sim_step: return "sim_step";
    case TracePhase::observe: return "observe";
    case TracePhase::done: return "done";
    case TracePhase::reward: return "reward";
    case TracePhase::end_policy: return "end_policy";
    case TracePhase::space_check: return "space_check";
  }
  return "reset";
}

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Environment::Environment(EnvironmentConfig config, EnvironmentOptions options, const Registries& registries)
    : config_(std::move(config)), registries_(&registries), horizon_(config_.horizon) {
  const SimulatorEntry* entry = registries.simulators.find(config_.simulator);
  if (!entry) throw Error(ErrorCode::InvalidValue, "unknown simulator '" + config_.simulator + "'");
  sim_ = entry->factory(config_.simulator_config);

  epp_ = config_.make_provider();
  for (const auto& [name, spec] : epp_.specs()) store_.declare(name);

  part_properties_ = part_properties(config_, registries);
  const auto roots = graph_roots(config_);
  graph_ = build_graph(roots, registries.functors, build_context(config_, part_properties_));

  std::size_t r = 0;
  for (const auto& a : config_.agents) {
    agents_.push_back(build_agent(a, graph_, r, part_properties_));
    r += a.glues.size() + a.dones.size() + a.rewards.size();
  }
  for (; r < graph_.roots().size(); ++r) shared_dones_.push_back(graph_.roots()[r]);

  for (std::size_t i = 0; i < agents_.size(); ++i) {
    Agent& a = agents_[i];
    auto it = policies_.find(a.policy_handle);
    if (it == policies_.end()) {
      const PolicyConfig& pc = config_.agents[i].policy;
      auto policy = options.policy_override
                        ? registries.policies.create(*options.policy_override, options.policy_override_config, a.name)
                        : registries.policies.create(pc.name, pc.config, a.name);
      it = policies_.emplace(a.policy_handle, std::move(policy)).first;
    }
    a.policy = it->second;
  }

  state_.simulator = sim_.get();
  state_.references = &store_;
  state_.horizon = horizon_;
  state_.outputs.assign(graph_.size(), std::nullopt);
  provider_history_.push_back(epp_.state());
}

const Agent& Environment::agent(const std::string& name) const {
  for (const auto& a : agents_) {
    if (a.name == name) return a;
  }
  throw Error(ErrorCode::UnknownReference, "no agent named '" + name + "'");
}

void Environment::set_horizon(std::size_t horizon) {
  if (horizon == 0) throw Error(ErrorCode::InvalidValue, "horizon must be >= 1");
  horizon_ = horizon;
  state_.horizon = horizon;
}

void Environment::emit(TracePhase phase, const std::string& subject) {
  if (trace_) trace_(TraceEvent{state_.step, phase, subject});
}

PartBinder Environment::binder() {
  return [this](Platform& platform) {
    for (const auto& a : config_.agents) {
      for (const auto& part : a.parts) {
        if (part.platform != platform.name() || platform.part(part.name)) continue;
        const auto& factory = registries_->parts.resolve_part(part.group, sim_->type(), platform.platform_type());
        platform.attach(factory(part.name, part.config));
      }
    }
  };
}

void Environment::evaluate_glues() {
  for (std::size_t i : graph_.schedule()) {
    FunctorNode& n = graph_.node(i);
    if (n.kind != FunctorKind::glue) continue;
    emit(TracePhase::observe, n.name);
    state_.outputs[i] = n.glue()->observe(state_);
  }
}

StepResult Environment::reset(std::uint64_t seed) {
  state_.step = 0;
  emit(TracePhase::reset);
  ++episodes_;
  started_ = true;
  episode_done_ = false;
  done_.clear();
  closed_.clear();
  state_.dones_this_step.clear();
  state_.outputs.assign(graph_.size(), std::nullopt);
  state_.horizon = horizon_;

  sampled_ = epp_.sample_episode(seed);
  store_.clear();
  store_.publish(sampled_);

  std::vector<PlatformInit> inits;
  for (const auto& p : config_.platforms) {
    PlatformInit init{p.name, p.type, {}};
    for (const auto& s : p.init) init.parameters.emplace(s.name().substr(p.name.size() + 1), sampled_.at(s.name()));
    inits.push_back(std::move(init));
  }
  sim_->reset(inits, binder());
  graph_.reset_episode();
  for (auto& [handle, policy] : policies_) policy->reset();

  spot_rng_ = Rng(derive_seed(seed, "space_check"));
  space_checks_ = 0;
  log_ = EpisodeLog{episodes_ - 1, seed, sampled_, {}};

  evaluate_glues();
  StepResult result;
  for (const auto& a : agents_) {
    result.observations.emplace(a.name, a.observe(state_));
    result.rewards.emplace(a.name, 0.0);
    result.dones.emplace(a.name, false);
    auto& comps = result.reward_components[a.name];
    for (const auto& [name, node] : a.rewards) comps.emplace(name, 0.0);
  }
  check_spaces(result);
  return result;
}

StepResult Environment::step(const std::map<std::string, Action>& actions) {
  if (!started_ || episode_done_) {
    throw Error(ErrorCode::EpisodeAlreadyDone, started_ ? "episode has ended; call reset" : "call reset first");
  }

  // (1) actions
  for (const auto& [agent_name, action] : actions) {
    const Agent& a = agent(agent_name);
    if (closed_.count(a.name)) continue;
    for (const auto& [glue, q] : action) {
      auto it = std::find_if(a.glues.begin(), a.glues.end(), [&](const auto& g) { return g.first == glue; });
      if (it == a.glues.end() || !a.action_space.count(glue)) {
        throw Error(ErrorCode::InvalidValue, "agent '" + a.name + "' has no action glue '" + glue + "'");
      }
      emit(TracePhase::apply_action, glue);
      graph_.node(it->second).glue()->apply_action(q, *sim_);
    }
  }

  // (2) simulator
  ++state_.step;
  emit(TracePhase::sim_step);
  sim_->step();
  const auto removed = sim_->take_removed_platforms();

  // (3) observations
  evaluate_glues();

  // (4) dones
  state_.dones_this_step.clear();
  std::set<std::string> live;
  for (const auto& a : agents_) {
    if (!done_.count(a.name)) live.insert(a.name);
  }
  for (const auto& a : agents_) {
    if (!live.count(a.name)) continue;
    for (const auto& p : a.platforms) {
      if (std::find(removed.begin(), removed.end(), p) != removed.end()) {
        state_.dones_this_step.emplace(a.name, DoneResult{DoneStatusCode::LOSS, false, "platform_removed"});
      }
    }
  }
  for (std::size_t i : graph_.schedule()) {
    FunctorNode& n = graph_.node(i);
    if (n.kind != FunctorKind::done && n.kind != FunctorKind::shared_done) continue;
    emit(TracePhase::done, n.name);
    auto r = n.done()->evaluate(state_);
    if (!r) continue;
    if (n.kind == FunctorKind::done) {
      if (live.count(n.agent)) state_.dones_this_step.emplace(n.agent, *r);
    } else {
      for (const auto& a : live) state_.dones_this_step.emplace(a, *r);
    }
  }

  // (5) rewards
  std::map<std::size_t, double> node_reward;
  for (std::size_t i : graph_.schedule()) {
    FunctorNode& n = graph_.node(i);
    if (n.kind != FunctorKind::reward || !live.count(n.agent)) continue;
    emit(TracePhase::reward, n.name);
    node_reward[i] = n.reward()->evaluate(state_);
  }

  // (6) end policy
  emit(TracePhase::end_policy);
  for (const auto& [agent, r] : state_.dones_this_step) done_.emplace(agent, r);
  if (config_.end_mode == EpisodeEndMode::any_agent_done) {
    episode_done_ = !state_.dones_this_step.empty();
  } else {
    episode_done_ = done_.size() == agents_.size();
  }

  StepResult result;
  result.episode_done = episode_done_;
  EpisodeRow row;
  row.step = state_.step;
  for (const auto& a : agents_) {
    if (!live.count(a.name)) continue;
    result.observations.emplace(a.name, a.observe(state_));
    auto& comps = result.reward_components[a.name];
    for (const auto& [name, node] : a.rewards) comps.emplace(name, node_reward.at(node));
    double total = 0.0;
    for (const auto& [name, v] : comps) {
      total += v;
      row.rewards.emplace(a.name + "/" + name, v);
    }
    result.rewards.emplace(a.name, total);
    auto d = state_.dones_this_step.find(a.name);
    result.dones.emplace(a.name, d != state_.dones_this_step.end() || episode_done_);
    row.dones.emplace(a.name, d != state_.dones_this_step.end() ? std::string(to_string(d->second.code)) : "");
    if (d != state_.dones_this_step.end()) {
      result.status.emplace(a.name, d->second);
      if (d->second.truncated) result.truncated = true;
    }
  }
  row.truncated = result.truncated;
  log_.rows.push_back(std::move(row));
  for (const auto& [agent, r] : state_.dones_this_step) closed_.insert(agent);

  // (7) space check
  check_spaces(result);
  return result;
}

void Environment::check_spaces(const StepResult& result) {
  const auto kind = config_.space_check.kind;
  if (kind == SpaceCheckMode::Kind::off) return;
  if (kind == SpaceCheckMode::Kind::spot_check && !(spot_rng_.uniform01() < config_.space_check.probability)) return;
  ++space_checks_;
  emit(TracePhase::space_check);
  for (const auto& [agent_name, obs] : result.observations) {
    const Agent& a = agent(agent_name);
    for (const auto& [key, q] : obs) {
      const Box& box = a.observation_space.at(key);
      if (auto i = box.first_violation(q)) {
        std::ostringstream os;
        const double v = *i < q.size() ? convert_value(q[*i], q.unit(), box.unit) : 0.0;
        os << "agent '" << a.name << "', glue '" << key.substr(0, key.rfind('/')) << "' (" << key << ") element "
           << *i << ": value " << number(v) << " outside [" << number(*i < box.size() ? box.low[*i] : 0.0) << ", "
           << number(*i < box.size() ? box.high[*i] : 0.0) << "] " << box.unit.name();
        throw Error(ErrorCode::SpaceViolation, os.str());
      }
    }
  }
}

std::map<std::string, Action> Environment::policy_actions(const StepResult& last) {
  std::map<std::string, Action> out;
  for (const auto& a : agents_) {
    if (done_.count(a.name)) continue;
    auto it = last.observations.find(a.name);
    if (it == last.observations.end()) continue;
    const std::uint64_t seed = derive_seed(derive_seed(log_.seed, a.name), static_cast<std::uint64_t>(state_.step));
    out.emplace(a.name, a.policy->act(it->second, a.action_space, seed));
  }
  return out;
}

void Environment::apply_training_result(const nlohmann::json& result) {
  epp_.apply_training_result(result);
  provider_history_.push_back(epp_.state());
}

void Environment::write_episode_csv(const std::filesystem::path& path) const {
  std::vector<std::string> reward_cols;
  for (const auto& a : agents_) {
    std::set<std::string> names;
    for (const auto& [name, node] : a.rewards) names.insert(name);
    for (const auto& n : names) reward_cols.push_back(a.name + "/" + n);
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << "step";
  for (const auto& c : reward_cols) out << ",reward:" << c;
  for (const auto& a : agents_) out << ",done:" << a.name;
  out << ",truncated";
  for (const auto& [name, q] : log_.parameters.values) out << ",param:" << name << " [" << q.unit().name() << "]";
  out << "\n";
  for (const auto& row : log_.rows) {
    out << row.step;
    for (const auto& c : reward_cols) {
      out << ",";
      if (auto it = row.rewards.find(c); it != row.rewards.end()) out << number(it->second);
    }
    for (const auto& a : agents_) {
      out << ",";
      if (auto it = row.dones.find(a.name); it != row.dones.end()) out << it->second;
    }
    out << "," << (row.truncated ? 1 : 0);
    for (const auto& [name, q] : log_.parameters.values) out << "," << number(q.scalar());
    out << "\n";
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

nlohmann::json Environment::run_config() const {
  nlohmann::json j;
  j["config"] = config_.tree;
  j["provider_history"] = provider_history_;
  j["episodes"] = episodes_;
  return j;
}

EpisodeSummary run_episode(Environment& env, std::uint64_t seed, const StepObserver& observer) {
  EpisodeSummary s;
  StepResult r = env.reset(seed);
  for (const auto& a : env.agents()) {
    s.total_reward[a.name] = 0.0;
    s.outcome[a.name] = std::nullopt;
  }
  while (!env.episode_done()) {
    auto actions = env.policy_actions(r);
    r = env.step(actions);
    for (const auto& [agent, v] : r.rewards) s.total_reward[agent] += v;
    for (const auto& [agent, d] : r.status) s.outcome[agent] = d;
    if (r.truncated) s.truncated = true;
    if (observer) observer(actions, r);
  }
  s.steps = env.step_count();
  return s;
}

}  // namespace envforge
