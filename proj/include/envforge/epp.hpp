#pragma once

// Episode parameter provider: named distributions sampled once per episode,
// curriculum updaters over their hyperparameters, and the reference store
// that lets several functors read one sampled value.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "envforge/rng.hpp"
#include "envforge/units.hpp"
#include "json.hpp"

namespace envforge {

struct Constant {
  double value = 0.0;
};

struct Uniform {
  double low = 0.0;
  double high = 0.0;
};

struct TruncatedGaussian {
  double mu = 0.0;
  double sigma = 1.0;
  double low = -1.0;
  double high = 1.0;
};

struct DiscreteChoice {
  std::vector<double> values;
  std::vector<double> weights;  // empty means uniform over values
};

using Distribution = std::variant<Constant, Uniform, TruncatedGaussian, DiscreteChoice>;

std::string_view distribution_kind(const Distribution& d) noexcept;

/// Throws Error(InvalidValue) when the distribution invariants do not hold.
void check_distribution(const Distribution& d);

std::optional<double> hyperparameter(const Distribution& d, std::string_view name) noexcept;
std::vector<std::string> hyperparameter_names(const Distribution& d);

/// Draws one value with the supplied stream.
double sample_distribution(const Distribution& d, Rng& rng);

double standard_normal_cdf(double x) noexcept;
double standard_normal_quantile(double p) noexcept;
/// Quantile of N(mu, sigma^2) truncated to [low, high] at probability u in [0, 1].
double truncated_normal_quantile(const TruncatedGaussian& tg, double u) noexcept;

nlohmann::json distribution_to_json(const Distribution& d);

/// Fixed-step increment of one hyperparameter. The current value is always
/// base + applications * step, then clamped to limit and to the distribution
/// invariants.
struct IncrementUpdater {
  std::string target;
  double step = 0.0;
  std::optional<double> limit;
};

class ParameterSpec {
 public:
  /// Throws Error(InvalidValue) for an invalid distribution and
  /// Error(UnknownHyperparameter) for an updater target the distribution lacks.
  ParameterSpec(std::string name, Distribution distribution, Unit unit,
                std::vector<IncrementUpdater> updaters = {});

  const std::string& name() const noexcept { return name_; }
  const Distribution& distribution() const noexcept { return distribution_; }
  Unit unit() const noexcept { return unit_; }
  const std::vector<IncrementUpdater>& updaters() const noexcept { return updaters_; }
  std::size_t applications() const noexcept { return applications_; }

  void apply_updaters();
  /// Replaces the distribution by a constant (converted into this spec's unit);
  /// updaters are dropped.
  void fix_value(const Quantity& value);

  /// Deterministic in (episode_seed, name).
  Quantity sample(std::uint64_t episode_seed) const;

  nlohmann::json to_json() const;

 private:
  std::string name_;
  Distribution distribution_;
  Distribution initial_;
  Unit unit_;
  std::vector<IncrementUpdater> updaters_;
  std::size_t applications_ = 0;
};

struct SampledParameters {
  std::map<std::string, Quantity> values;
  std::uint64_t episode_seed = 0;

  const Quantity& at(const std::string& name) const;
  bool contains(const std::string& name) const { return values.count(name) != 0; }
  friend bool operator==(const SampledParameters&, const SampledParameters&) = default;
};

class EpisodeParameterProvider {
 public:
  /// Throws std::invalid_argument on a duplicate name.
  void add(ParameterSpec spec);
  bool contains(const std::string& name) const { return specs_.count(name) != 0; }
  const ParameterSpec& spec(const std::string& name) const;
  const std::map<std::string, ParameterSpec>& specs() const noexcept { return specs_; }
  std::size_t iteration() const noexcept { return iteration_; }

  SampledParameters sample_episode(std::uint64_t seed) const;

  /// Fires every updater once. The built-in updaters ignore the result payload.
  void apply_training_result(const nlohmann::json& result);

  /// Pins a parameter to a constant; throws Error(UnknownReference) for an
  /// undeclared name and Error(DimensionMismatch) for an incompatible unit.
  void fix_value(const std::string& name, const Quantity& value);

  nlohmann::json state() const;

 private:
  std::map<std::string, ParameterSpec> specs_;
  std::size_t iteration_ = 0;
};

class ReferenceStore {
 public:
  /// Declares a store key backed by the EPP parameter of the same name.
  void declare(const std::string& key);
  bool declared(const std::string& key) const { return declared_.count(key) != 0; }
  const std::set<std::string>& keys() const noexcept { return declared_; }

  /// Copies the declared keys' values out of this episode's sample.
  void publish(const SampledParameters& sampled);
  void clear() noexcept { values_.clear(); }

  /// Throws Error(UnknownReference) or Error(NotYetSampled).
  const Quantity& lookup(const std::string& key) const;

 private:
  std::set<std::string> declared_;
  std::map<std::string, Quantity> values_;
};

}  // namespace envforge
