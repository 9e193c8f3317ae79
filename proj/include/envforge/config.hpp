#pragma once

// Loading of YAML config trees (with list-position includes), validation
// into typed agent/environment plans, and reference resolution.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "envforge/epp.hpp"
#include "envforge/error.hpp"
#include "envforge/functors.hpp"
#include "envforge/parts.hpp"
#include "envforge/policies.hpp"
#include "envforge/simulators.hpp"
#include "json.hpp"

namespace envforge {

struct Registries {
  FunctorRegistry functors;
  PluginRegistry parts;
  SimulatorRegistry simulators;
  PolicyRegistry policies;
};

/// Built-in functors, parts, simulators and policies; frozen.
const Registries& default_registries();

// ---------------------------------------------------------------------------
// Loading

struct SourceLocation {
  std::string file;
  int line = 0;    // 1-based
  int column = 0;  // 1-based
};

struct LoadedConfig {
  nlohmann::json tree;
  /// Tree path ("glues/0/functor") -> where that node was written.
  std::map<std::string, SourceLocation> locations;
  std::filesystem::path file;  // empty for in-memory text
  std::filesystem::path base_dir;  // relative paths inside the config resolve here

  /// Location of the deepest written ancestor of `path`.
  std::optional<SourceLocation> locate(const std::string& path) const;
};

/// Throws Error(FileNotFound), Error(ParseError) or Error(IncludeCycle).
/// `- include: other.yml` inside a list splices the other file's list items
/// (or its single mapping) at that position. Paths are relative to the file
/// that contains the directive.
LoadedConfig load_config(const std::filesystem::path& path);
/// As load_config for in-memory text; includes resolve against `base_dir`.
LoadedConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".",
                          const std::string& display_name = "<text>");

// ---------------------------------------------------------------------------
// Validation

struct ValidationIssue {
  std::string path;
  ErrorCode code;
  std::string message;
  std::optional<SourceLocation> location;
};

struct ValidationReport {
  std::vector<ValidationIssue> errors;

  bool ok() const noexcept { return errors.empty(); }
  /// One "path: Code: message (file:line:col)" line per error, then "<n> errors".
  std::string to_string() const;
};

struct PartConfig {
  std::string group;
  std::string name;
  std::string platform;
  nlohmann::json config = nlohmann::json::object();
  std::string path;
};

struct PolicyConfig {
  std::string name = "random";
  std::string handle;  // agents sharing a handle share one policy instance
  nlohmann::json config = nlohmann::json::object();
};

struct AgentConfig {
  std::string name;
  bool trainable = true;
  std::vector<std::string> platforms;
  std::vector<PartConfig> parts;
  /// Agent parameters; names are "<agent>/<key>" once loaded into an environment.
  std::vector<ParameterSpec> parameters;
  /// Keys declared in the agent's reference store (subset of `parameters`).
  std::vector<std::string> reference_keys;
  std::vector<FunctorSpec> glues;
  std::vector<FunctorSpec> dones;
  std::vector<FunctorSpec> rewards;
  PolicyConfig policy;
  nlohmann::json tree;  // as written, includes expanded
};

struct PlatformConfig {
  std::string name;
  std::string type;
  std::vector<ParameterSpec> init;  // names "<platform>/<param>"
};

enum class EpisodeEndMode { all_agents_done, any_agent_done };

struct SpaceCheckMode {
  enum class Kind { every_step, spot_check, off };
  Kind kind = Kind::every_step;
  double probability = 0.01;
};

struct EnvironmentConfig {
  std::string simulator;
  nlohmann::json simulator_config = nlohmann::json::object();
  std::vector<PlatformConfig> platforms;
  std::vector<AgentConfig> agents;
  std::vector<FunctorSpec> shared_dones;
  EpisodeEndMode end_mode = EpisodeEndMode::all_agents_done;
  std::size_t horizon = 1000;
  std::vector<ParameterSpec> reference_store;
  SpaceCheckMode space_check;
  /// Resolved tree with agents inlined; validates on its own.
  nlohmann::json tree;

  /// Every sampled parameter: platform inits, global store, agent parameters.
  EpisodeParameterProvider make_provider() const;
  /// Store keys and their units.
  std::map<std::string, Unit> reference_units() const;
};

enum class ConfigKind { agent, environment, unknown };
ConfigKind detect_kind(const nlohmann::json& tree) noexcept;

struct AgentValidation {
  ValidationReport report;
  std::optional<AgentConfig> config;
};

struct EnvironmentValidation {
  ValidationReport report;
  std::optional<EnvironmentConfig> config;
};

AgentValidation validate_agent(const LoadedConfig& loaded, const Registries& registries = default_registries());
/// Loads referenced agent files, validates every part, resolves references
/// and test-compiles the functor graph.
EnvironmentValidation validate_environment(const LoadedConfig& loaded,
                                           const Registries& registries = default_registries());

/// Loads and validates any config file; never throws.
ValidationReport validate_file(const std::filesystem::path& path,
                               const Registries& registries = default_registries());

/// Rewrites every functor `references` value to a fully qualified store key:
/// "<agent>/<key>" when the agent declares it, else the global key. Reports
/// UnknownReference and DimensionMismatch.
ValidationReport resolve_references(EnvironmentConfig& config, const Registries& registries = default_registries());

/// Parses a ParameterSpec mapping (`distribution`, `unit`, `updaters`) or a
/// bare quantity (constant). Throws Error with the failing sub-path in the message.
ParameterSpec parameter_spec_from_json(const std::string& name, const nlohmann::json& j);

/// Loads and validates an environment file; throws Error(InvalidValue) with
/// the report text when invalid.
EnvironmentConfig load_environment(const std::filesystem::path& path,
                                   const Registries& registries = default_registries());

/// Part prototypes keyed by (platform, part name); used for property lookup
/// before a simulator exists. Throws Error(NoMatch)/Error(UnknownGroup).
std::map<std::pair<std::string, std::string>, PartProperty> part_properties(
    const EnvironmentConfig& config, const Registries& registries = default_registries());

/// Graph roots in a fixed order: per agent its glues, dones and rewards,
/// then the shared dones, then the environment horizon done.
std::vector<GraphRoot> graph_roots(const EnvironmentConfig& config);

/// Property lookup over `part_properties` plus reference units.
BuildContext build_context(const EnvironmentConfig& config,
                           std::map<std::pair<std::string, std::string>, PartProperty> properties);

}  // namespace envforge
