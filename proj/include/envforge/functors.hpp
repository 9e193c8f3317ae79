#pragma once

// Glue, Done and Reward functors, their registry, and compilation of
// declarative specs into a deduplicated, topologically ordered graph.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "envforge/epp.hpp"
#include "envforge/parts.hpp"
#include "envforge/schema.hpp"
#include "envforge/units.hpp"
#include "json.hpp"

namespace envforge {

class Simulator;

enum class FunctorKind { glue, reward, done, shared_done };
std::string_view to_string(FunctorKind kind) noexcept;

enum class DoneStatusCode { WIN, PARTIAL_WIN, DRAW, PARTIAL_LOSS, LOSS };
std::string_view to_string(DoneStatusCode code) noexcept;
std::optional<DoneStatusCode> done_status_from_string(std::string_view name) noexcept;

using Observation = std::map<std::string, Quantity>;
using ObservationSpace = std::map<std::string, Box>;

struct DoneResult {
  DoneStatusCode code = DoneStatusCode::DRAW;
  bool truncated = false;
  std::string source;  // name of the done that fired

  friend bool operator==(const DoneResult&, const DoneResult&) = default;
};

// ---------------------------------------------------------------------------
// Declarative specs

struct FunctorSpec;

struct WrappedChild {
  std::string role;                          // "" (single), list index, or map key
  std::string ref;                           // name of a sibling glue, or empty
  std::shared_ptr<const FunctorSpec> spec;   // inline child, or null when ref is set
};

struct ExtractorSpec {
  std::optional<std::string> key;
  std::optional<std::size_t> index;
};

enum class WrapShape { none, single, list, map };

struct FunctorSpec {
  std::string functor;
  std::string name;                                 // optional display name
  nlohmann::json config = nlohmann::json::object(); // hyperparameters
  std::map<std::string, std::string> references;    // param -> reference-store key
  WrapShape shape = WrapShape::none;
  std::vector<WrappedChild> wrapped;
  std::optional<ExtractorSpec> extractor;
  std::string path;                                 // config location
};

/// Display name: explicit `name`, else derived from functor and its target.
std::string default_functor_name(const FunctorSpec& spec);

// ---------------------------------------------------------------------------
// Runtime contracts

/// Per-step state visible to functors.
struct EpisodeState {
  std::size_t step = 0;  // steps completed in this episode, including the current one
  std::size_t horizon = 0;
  const Simulator* simulator = nullptr;
  const ReferenceStore* references = nullptr;
  std::vector<std::optional<Observation>> outputs;    // by node index
  std::map<std::string, DoneResult> dones_this_step;  // agent -> result

  const Platform* platform(const std::string& name) const;
  /// Throws Error(UnknownReference) / Error(NotYetSampled).
  const Quantity& reference(const std::string& key) const;
  /// Throws std::logic_error when the node produced no output this step.
  const Observation& output(std::size_t node) const;
  const DoneResult* done_for(const std::string& agent) const;
};

class Functor {
 public:
  virtual ~Functor() = default;
  virtual void reset_episode() {}
};

class Glue : public Functor {
 public:
  virtual ObservationSpace observation_space() const = 0;
  virtual Observation observe(const EpisodeState& state) = 0;
  virtual std::optional<Box> action_space() const { return std::nullopt; }
  /// Forwards an action fragment toward the platform; sensor-only glues ignore it.
  virtual void apply_action(const Quantity& /*action*/, Simulator& /*sim*/) {}
};

class Done : public Functor {
 public:
  virtual std::optional<DoneResult> evaluate(const EpisodeState& state) = 0;
};

class Reward : public Functor {
 public:
  /// Dones for the step have already run; see EpisodeState::dones_this_step.
  virtual double evaluate(const EpisodeState& state) = 0;
};

// ---------------------------------------------------------------------------
// Construction

/// Environment knowledge available while compiling the graph.
struct BuildContext {
  std::function<const PartProperty*(const std::string& platform, const std::string& part)>
      part_property;
  std::function<std::optional<Unit>(const std::string& reference_key)> reference_unit;
};

struct ChildBinding {
  std::string role;
  std::size_t node = 0;
  const Glue* glue = nullptr;
};

struct FunctorInit {
  std::string name;
  nlohmann::json config;                             // defaults applied
  std::map<std::string, std::string> references;     // param -> store key
  std::vector<ChildBinding> children;
  std::optional<ExtractorSpec> extractor;
  const BuildContext* context = nullptr;

  const ChildBinding& only_child() const;
  const ChildBinding* child(std::string_view role) const;
};

/// Reads a glue child's observation entry, its space and unit.
class Extractor {
 public:
  /// Throws Error(UnknownExtractorTarget) when the key is not in the child's space.
  Extractor(const ChildBinding& child, const std::optional<ExtractorSpec>& spec);

  std::size_t source() const noexcept { return node_; }
  const std::string& key() const noexcept { return key_; }
  std::optional<std::size_t> index() const noexcept { return index_; }
  /// Full entry, or one element when an index was configured.
  Quantity value(const EpisodeState& state) const;
  Box space() const;
  Unit unit() const noexcept { return space_.unit; }

 private:
  std::size_t node_;
  std::string key_;
  std::optional<std::size_t> index_;
  Box space_;
};

/// A quantity hyperparameter given either inline or through a reference.
class QuantitySource {
 public:
  /// `fallback` is used when the parameter is neither in config nor referenced.
  static QuantitySource from(const FunctorInit& init, const std::string& param, Unit target,
                             std::optional<Quantity> fallback = std::nullopt);

  Quantity get(const EpisodeState& state) const;
  double scalar(const EpisodeState& state) const { return get(state).scalar(); }
  bool referenced() const noexcept { return !key_.empty(); }

 private:
  std::optional<Quantity> constant_;
  std::string key_;
  Unit target_ = units::none();
};

using FunctorFactory = std::function<std::unique_ptr<Functor>(const FunctorInit&)>;

struct FunctorEntry {
  FunctorKind kind = FunctorKind::glue;   // done entries may also serve as shared dones
  Schema schema;
  FunctorFactory factory;
  std::size_t min_children = 0;
  std::size_t max_children = 0;           // SIZE_MAX for unbounded
  bool uses_platform = false;             // receives the agent's platform when unset
};

class FunctorRegistry {
 public:
  /// Throws Error(RegistryFrozen) after freeze().
  void add(const std::string& name, FunctorEntry entry);
  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }
  const FunctorEntry* find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, FunctorEntry> entries_;
  bool frozen_ = false;
};

void register_builtin_functors(FunctorRegistry& registry);

// ---------------------------------------------------------------------------
// Graph

struct GraphRoot {
  FunctorKind kind = FunctorKind::glue;
  FunctorSpec spec;
  std::string agent;     // empty for shared dones
  std::string platform;  // agent's default platform
};

struct FunctorNode {
  std::string id;         // hex of the structural hash
  std::string canonical;  // structural key the hash is taken over
  FunctorKind kind = FunctorKind::glue;
  std::string functor;
  std::string name;
  std::string agent;
  std::vector<std::pair<std::string, std::size_t>> children;  // (role, node index)
  std::unique_ptr<Functor> impl;

  Glue* glue() const;
  Done* done() const;
  Reward* reward() const;
};

class FunctorGraph {
 public:
  const std::vector<FunctorNode>& nodes() const noexcept { return nodes_; }
  FunctorNode& node(std::size_t i) { return nodes_.at(i); }
  const FunctorNode& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }

  /// Glue nodes in topological order, then done nodes, then reward nodes.
  const std::vector<std::size_t>& schedule() const noexcept { return schedule_; }
  /// Node index of each GraphRoot passed to build_graph, in input order.
  const std::vector<std::size_t>& roots() const noexcept { return roots_; }
  std::optional<std::size_t> find(const std::string& id) const;

  void reset_episode();

 private:
  std::vector<FunctorNode> nodes_;
  std::vector<std::size_t> schedule_;
  std::vector<std::size_t> roots_;

  friend FunctorGraph build_graph(const std::vector<GraphRoot>&, const FunctorRegistry&,
                                  const BuildContext&);
};

/// Compiles roots into one graph. Identical specs (same functor, resolved
/// config, references and children) share one node. Throws
/// Error(CycleDetected), Error(UnknownExtractorTarget), Error(UnknownFunctor).
FunctorGraph build_graph(const std::vector<GraphRoot>& roots, const FunctorRegistry& registry,
                         const BuildContext& context);

}  // namespace envforge
