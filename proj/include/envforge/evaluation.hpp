#pragma once

// Post-training pipeline: Evaluate (rollouts over a set of initial
// conditions, one artifact per case), Generate Metrics (composable metric
// functors over stored artifacts), Visualize (stdout table, HTML plots).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "envforge/config.hpp"
#include "envforge/environment.hpp"
#include "json.hpp"

namespace envforge {

// ---------------------------------------------------------------------------
// Artifacts

inline constexpr const char* kArtifactSchema = "envforge.artifact/1";

struct StepRecord {
  std::size_t step = 0;
  std::map<std::string, AgentObservation> observations;
  std::map<std::string, Action> actions;
  std::map<std::string, std::map<std::string, double>> rewards;
  std::map<std::string, DoneResult> dones;
  std::map<std::string, std::map<std::string, Quantity>> platform_states;
  nlohmann::json environment;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct AgentOutcome {
  std::optional<DoneResult> status;
  double total_reward = 0.0;
  std::map<std::string, double> component_totals;

  friend bool operator==(const AgentOutcome&, const AgentOutcome&) = default;
};

struct EpisodeArtifact {
  std::string case_id;
  std::uint64_t seed = 0;
  std::size_t horizon = 0;
  std::map<std::string, Quantity> parameters;
  std::vector<StepRecord> steps;
  std::map<std::string, AgentOutcome> outcome;

  friend bool operator==(const EpisodeArtifact&, const EpisodeArtifact&) = default;
};

/// JSON lines: a header record, one record per step, an outcome record.
std::string serialize_artifact(const EpisodeArtifact& artifact);
/// Throws Error(IoError) for malformed input.
EpisodeArtifact deserialize_artifact(const std::string& text);

void write_artifact(const EpisodeArtifact& artifact, const std::filesystem::path& path);
EpisodeArtifact read_artifact(const std::filesystem::path& path);
/// Every *.jsonl file in `dir`, in file-name order.
std::vector<EpisodeArtifact> read_artifacts(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Evaluate

struct TestCase {
  std::string id;
  std::map<std::string, Quantity> parameters;
  std::optional<std::size_t> horizon;
  std::optional<std::uint64_t> seed;
};

/// Reads `cases: [{id, parameters: {name: quantity}, horizon, seed}]` and
/// checks every parameter against the environment's provider. Throws
/// Error(UnknownReference), Error(DimensionMismatch), Error(InvalidValue).
std::vector<TestCase> load_test_cases(const std::filesystem::path& path, const EnvironmentConfig& env);
std::vector<TestCase> parse_test_cases(const nlohmann::json& tree, const EnvironmentConfig& env);

struct EvaluationOptions {
  std::optional<std::string> policy;     // overrides the agents' policies
  nlohmann::json policy_config = nlohmann::json::object();
  int workers = 1;                       // 1 runs the serial loop
  std::uint64_t base_seed = 0;           // seed of cases that set none
};

struct CaseResult {
  std::string id;
  std::filesystem::path artifact;  // empty when the case failed
  std::string error;
};

/// One rollout per case, no file output.
EpisodeArtifact rollout_case(const EnvironmentConfig& env, const TestCase& test_case,
                             const EvaluationOptions& options);

/// Writes <out>/artifacts/<id>.jsonl per case and <out>/evaluation.json.
/// Throws Error(IoError) before any rollout when `out` is not writable.
/// Per-case failures are recorded and the remaining cases still run.
std::vector<CaseResult> evaluate(const EnvironmentConfig& env, const std::vector<TestCase>& cases,
                                 const std::filesystem::path& out, const EvaluationOptions& options = {});

/// In-memory evaluation; `workers` > 1 runs cases in parallel.
std::vector<std::optional<EpisodeArtifact>> evaluate_cases(const EnvironmentConfig& env,
                                                           const std::vector<TestCase>& cases,
                                                           const EvaluationOptions& options,
                                                           std::vector<std::string>* errors = nullptr);

// ---------------------------------------------------------------------------
// Metrics

enum class MetricKind { terminal, non_terminal };
std::string_view to_string(MetricKind kind) noexcept;

struct MetricValue {
  MetricKind kind = MetricKind::terminal;
  nlohmann::json value;
};

using MetricResults = std::map<std::string, MetricValue>;

struct MetricSpec {
  std::string name;
  std::string type;
  std::vector<std::string> inputs;
  nlohmann::json config = nlohmann::json::object();
};

using MetricFunction = std::function<MetricValue(const std::vector<EpisodeArtifact>& artifacts,
                                                 const std::vector<const MetricValue*>& inputs,
                                                 const nlohmann::json& config)>;

struct MetricEntry {
  MetricKind kind;
  MetricFunction compute;
  std::vector<std::string> default_inputs;  // used when a spec lists none
};

class MetricRegistry {
 public:
  void add(const std::string& type, MetricEntry entry);
  const MetricEntry* find(const std::string& type) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, MetricEntry> entries_;
};

/// success_count, success_rate, episode_length, total_reward,
/// reward_component_proportions, done_code_histogram, mean, step_reward_series.
const MetricRegistry& builtin_metrics();

/// `metrics: [{name, type, inputs, config}]`; an absent or empty file gives
/// one metric per built-in type, named after it.
std::vector<MetricSpec> parse_metric_specs(const nlohmann::json& tree);
std::vector<MetricSpec> default_metric_specs();

/// Evaluates in dependency order. Throws Error(UnknownMetricInput),
/// Error(MetricCycle), Error(InvalidValue) for an unknown type.
MetricResults compute_metrics(const std::vector<EpisodeArtifact>& artifacts, const std::vector<MetricSpec>& specs,
                              const MetricRegistry& registry = builtin_metrics());

nlohmann::json metrics_to_json(const MetricResults& results);
MetricResults metrics_from_json(const nlohmann::json& j);

/// Reads <out>/artifacts, writes <out>/metrics.json, returns the results.
MetricResults generate_metrics(const std::filesystem::path& out, const std::vector<MetricSpec>& specs);

// ---------------------------------------------------------------------------
// Visualize

struct VisualizationSpec {
  std::string type;                  // table | html
  std::vector<std::string> metrics;  // table: empty means every terminal metric
  std::string title;
  std::string output;                // html: file name under the output dir
};

std::vector<VisualizationSpec> parse_visualizations(const nlohmann::json& tree);

/// Prints aligned name/value rows. Throws Error(UnknownMetric) and
/// Error(MetricKindMismatch) for a listed non-terminal metric.
void render_table(const MetricResults& results, const VisualizationSpec& spec, std::ostream& out);
/// Self-contained HTML with an inline SVG plot of one non-terminal metric.
std::string render_html(const MetricResults& results, const VisualizationSpec& spec);

/// Runs every visualization; HTML files go to `out`. Returns written files.
std::vector<std::filesystem::path> visualize(const MetricResults& results,
                                             const std::vector<VisualizationSpec>& specs,
                                             const std::filesystem::path& out, std::ostream& table_out);

}  // namespace envforge
