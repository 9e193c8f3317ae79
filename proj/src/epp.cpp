#include "envforge/epp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "envforge/error.hpp"

namespace envforge {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void invalid(const std::string& message) {
  throw Error(ErrorCode::InvalidValue, message);
}

double* hyperparameter_slot(Distribution& d, std::string_view name) noexcept {
  return std::visit(Overloaded{
                        [&](Constant& c) -> double* { return name == "value" ? &c.value : nullptr; },
                        [&](Uniform& u) -> double* {
                          if (name == "low") return &u.low;
                          if (name == "high") return &u.high;
                          return nullptr;
                        },
                        [&](TruncatedGaussian& t) -> double* {
                          if (name == "mu") return &t.mu;
                          if (name == "sigma") return &t.sigma;
                          if (name == "low") return &t.low;
                          if (name == "high") return &t.high;
                          return nullptr;
                        },
                        [&](DiscreteChoice&) -> double* { return nullptr; },
                    },
                    d);
}

// Restores the distribution invariants after `target` was moved.
void clamp_invariants(Distribution& d, std::string_view target) {
  std::visit(Overloaded{
                 [](Constant&) {},
                 [&](Uniform& u) {
                   if (u.low > u.high) {
                     if (target == "low") u.low = u.high;
                     else u.high = u.low;
                   }
                 },
                 [&](TruncatedGaussian& t) {
                   if (!(t.sigma > 0.0)) t.sigma = std::numeric_limits<double>::min();
                   if (!(t.low < t.high)) {
                     if (target == "low") t.low = std::nextafter(t.high, -INFINITY);
                     else t.high = std::nextafter(t.low, INFINITY);
                   }
                 },
                 [](DiscreteChoice&) {},
             },
             d);
}

}  // namespace

std::string_view distribution_kind(const Distribution& d) noexcept {
  return std::visit(Overloaded{
                        [](const Constant&) { return std::string_view("constant"); },
                        [](const Uniform&) { return std::string_view("uniform"); },
                        [](const TruncatedGaussian&) { return std::string_view("truncated_gaussian"); },
                        [](const DiscreteChoice&) { return std::string_view("discrete_choice"); },
                    },
                    d);
}

void check_distribution(const Distribution& d) {
  std::visit(Overloaded{
                 [](const Constant& c) {
                   if (!std::isfinite(c.value)) invalid("constant value must be finite");
                 },
                 [](const Uniform& u) {
                   if (!std::isfinite(u.low) || !std::isfinite(u.high))
                     invalid("uniform bounds must be finite");
                   if (u.low > u.high) invalid("uniform requires low <= high");
                 },
                 [](const TruncatedGaussian& t) {
                   if (!(t.sigma > 0.0)) invalid("truncated_gaussian requires sigma > 0");
                   if (!(t.low < t.high)) invalid("truncated_gaussian requires low < high");
                   if (!std::isfinite(t.mu)) invalid("truncated_gaussian mu must be finite");
                 },
                 [](const DiscreteChoice& c) {
                   if (c.values.empty()) invalid("discrete_choice requires at least one value");
                   if (!c.weights.empty()) {
                     if (c.weights.size() != c.values.size())
                       invalid("discrete_choice weights must match values in length");
                     double total = 0.0;
                     for (double w : c.weights) {
                       if (!(w >= 0.0) || !std::isfinite(w))
                         invalid("discrete_choice weights must be non-negative");
                       total += w;
                     }
                     if (!(total > 0.0)) invalid("discrete_choice weights must sum to > 0");
                   }
                 },
             },
             d);
}

std::optional<double> hyperparameter(const Distribution& d, std::string_view name) noexcept {
  Distribution copy = d;
  if (const double* slot = hyperparameter_slot(copy, name)) return *slot;
  return std::nullopt;
}

std::vector<std::string> hyperparameter_names(const Distribution& d) {
  return std::visit(Overloaded{
                        [](const Constant&) { return std::vector<std::string>{"value"}; },
                        [](const Uniform&) { return std::vector<std::string>{"low", "high"}; },
                        [](const TruncatedGaussian&) {
                          return std::vector<std::string>{"mu", "sigma", "low", "high"};
                        },
                        [](const DiscreteChoice&) { return std::vector<std::string>{}; },
                    },
                    d);
}

double standard_normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double standard_normal_quantile(double p) noexcept {
  if (p <= 0.0) return -INFINITY;
  if (p >= 1.0) return INFINITY;
  // Rational approximation (Acklam) followed by one Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = standard_normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double truncated_normal_quantile(const TruncatedGaussian& tg, double u) noexcept {
  const double a = (tg.low - tg.mu) / tg.sigma;
  const double b = (tg.high - tg.mu) / tg.sigma;
  double z;
  if (a >= 0.0) {
    // Entirely in the upper tail: work with the survival function.
    const double qa = 0.5 * std::erfc(a / std::numbers::sqrt2);
    const double qb = 0.5 * std::erfc(b / std::numbers::sqrt2);
    z = -standard_normal_quantile(qa - u * (qa - qb));
  } else {
    const double pa = standard_normal_cdf(a);
    const double pb = standard_normal_cdf(b);
    z = standard_normal_quantile(pa + u * (pb - pa));
  }
  const double x = tg.mu + tg.sigma * z;
  if (!(x >= tg.low)) return tg.low;
  if (!(x <= tg.high)) return tg.high;
  return x;
}

double sample_distribution(const Distribution& d, Rng& rng) {
  return std::visit(Overloaded{
                        [](const Constant& c) { return c.value; },
                        [&](const Uniform& u) { return rng.uniform(u.low, u.high); },
                        [&](const TruncatedGaussian& t) {
                          return truncated_normal_quantile(t, rng.uniform01());
                        },
                        [&](const DiscreteChoice& c) {
                          const double r = rng.uniform01();
                          if (c.weights.empty()) {
                            auto idx = static_cast<std::size_t>(r * static_cast<double>(c.values.size()));
                            return c.values[std::min(idx, c.values.size() - 1)];
                          }
                          const double total = std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
                          const double target = r * total;
                          double acc = 0.0;
                          for (std::size_t i = 0; i < c.values.size(); ++i) {
                            acc += c.weights[i];
                            if (target < acc) return c.values[i];
                          }
                          // r * total can round up to total; pick the last positive weight.
                          for (std::size_t i = c.values.size(); i-- > 0;) {
                            if (c.weights[i] > 0.0) return c.values[i];
                          }
                          return c.values.back();
                        },
                    },
                    d);
}

nlohmann::json distribution_to_json(const Distribution& d) {
  nlohmann::json j;
  j["kind"] = std::string(distribution_kind(d));
  std::visit(Overloaded{
                 [&](const Constant& c) { j["value"] = c.value; },
                 [&](const Uniform& u) {
                   j["low"] = u.low;
                   j["high"] = u.high;
                 },
                 [&](const TruncatedGaussian& t) {
                   j["mu"] = t.mu;
                   j["sigma"] = t.sigma;
                   j["low"] = t.low;
                   j["high"] = t.high;
                 },
                 [&](const DiscreteChoice& c) {
                   j["values"] = c.values;
                   if (!c.weights.empty()) j["weights"] = c.weights;
                 },
             },
             d);
  return j;
}

ParameterSpec::ParameterSpec(std::string name, Distribution distribution, Unit unit,
                             std::vector<IncrementUpdater> updaters)
    : name_(std::move(name)),
      distribution_(std::move(distribution)),
      initial_(distribution_),
      unit_(unit),
      updaters_(std::move(updaters)) {
  check_distribution(distribution_);
  std::set<std::string> seen;
  for (const auto& u : updaters_) {
    if (!hyperparameter(distribution_, u.target)) {
      throw Error(ErrorCode::UnknownHyperparameter,
                  "parameter '" + name_ + "': " + std::string(distribution_kind(distribution_)) +
                      " has no hyperparameter '" + u.target + "'");
    }
    if (!seen.insert(u.target).second) {
      throw Error(ErrorCode::InvalidValue,
                  "parameter '" + name_ + "': more than one updater targets '" + u.target + "'");
    }
    if (!std::isfinite(u.step)) invalid("parameter '" + name_ + "': updater step must be finite");
  }
}

void ParameterSpec::apply_updaters() {
  if (updaters_.empty()) return;
  ++applications_;
  const auto n = static_cast<double>(applications_);
  for (const auto& u : updaters_) {
    double value = *hyperparameter(initial_, u.target) + n * u.step;
    if (u.limit) value = u.step >= 0.0 ? std::min(value, *u.limit) : std::max(value, *u.limit);
    *hyperparameter_slot(distribution_, u.target) = value;
  }
  // Invariants are restored only once every target has moved, so the result
  // does not depend on updater order.
  for (const auto& u : updaters_) clamp_invariants(distribution_, u.target);
}

void ParameterSpec::fix_value(const Quantity& value) {
  distribution_ = Constant{convert(value, unit_).scalar()};
  initial_ = distribution_;
  updaters_.clear();
  applications_ = 0;
}

Quantity ParameterSpec::sample(std::uint64_t episode_seed) const {
  Rng rng(derive_seed(episode_seed, name_));
  return Quantity(sample_distribution(distribution_, rng), unit_);
}

nlohmann::json ParameterSpec::to_json() const {
  nlohmann::json j;
  j["distribution"] = distribution_to_json(distribution_);
  j["unit"] = std::string(unit_.name());
  j["applications"] = applications_;
  auto& ups = j["updaters"] = nlohmann::json::array();
  for (const auto& u : updaters_) {
    nlohmann::json uj{{"target", u.target}, {"kind", "increment"}, {"step", u.step}};
    if (u.limit) uj["limit"] = *u.limit;
    ups.push_back(std::move(uj));
  }
  return j;
}

const Quantity& SampledParameters::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) {
    throw Error(ErrorCode::UnknownReference, "no sampled parameter named '" + name + "'");
  }
  return it->second;
}

void EpisodeParameterProvider::add(ParameterSpec spec) {
  const std::string name = spec.name();
  if (!specs_.emplace(name, std::move(spec)).second) {
    throw std::invalid_argument("duplicate episode parameter '" + name + "'");
  }
}

const ParameterSpec& EpisodeParameterProvider::spec(const std::string& name) const {
  auto it = specs_.find(name);
  if (it == specs_.end()) {
    throw Error(ErrorCode::UnknownReference, "no episode parameter named '" + name + "'");
  }
  return it->second;
}

SampledParameters EpisodeParameterProvider::sample_episode(std::uint64_t seed) const {
  SampledParameters out;
  out.episode_seed = seed;
  for (const auto& [name, spec] : specs_) out.values.emplace(name, spec.sample(seed));
  return out;
}

void EpisodeParameterProvider::apply_training_result(const nlohmann::json& /*result*/) {
  ++iteration_;
  for (auto& [name, spec] : specs_) spec.apply_updaters();
}

void EpisodeParameterProvider::fix_value(const std::string& name, const Quantity& value) {
  auto it = specs_.find(name);
  if (it == specs_.end()) {
    throw Error(ErrorCode::UnknownReference, "no episode parameter named '" + name + "'");
  }
  it->second.fix_value(value);
}

nlohmann::json EpisodeParameterProvider::state() const {
  nlohmann::json j;
  j["iteration"] = iteration_;
  auto& params = j["parameters"] = nlohmann::json::object();
  for (const auto& [name, spec] : specs_) params[name] = spec.to_json();
  return j;
}

void ReferenceStore::declare(const std::string& key) { declared_.insert(key); }

void ReferenceStore::publish(const SampledParameters& sampled) {
  values_.clear();
  for (const auto& key : declared_) {
    auto it = sampled.values.find(key);
    if (it != sampled.values.end()) values_.insert_or_assign(key, it->second);
  }
}

const Quantity& ReferenceStore::lookup(const std::string& key) const {
  if (!declared(key)) {
    throw Error(ErrorCode::UnknownReference, "reference store has no key '" + key + "'");
  }
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw Error(ErrorCode::NotYetSampled, "reference '" + key + "' has not been sampled yet");
  }
  return it->second;
}

}  // namespace envforge
