#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "envforge/error.hpp"
#include "envforge/functors.hpp"
#include "envforge/simulators.hpp"

namespace envforge {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const std::string kKey = "direct_observation";

ParamSchema param(std::string name, ParamKind kind, bool required = false,
                  nlohmann::json default_value = nullptr) {
  ParamSchema p;
  p.name = std::move(name);
  p.kind = kind;
  p.required = required;
  p.default_value = std::move(default_value);
  return p;
}

ParamSchema quantity(std::string name, Dimension dim, bool required = false,
                     nlohmann::json default_value = nullptr) {
  ParamSchema p = param(std::move(name), ParamKind::quantity, required, std::move(default_value));
  p.dimension = dim;
  return p;
}

ParamSchema positive(std::string name, nlohmann::json default_value = nullptr) {
  ParamSchema p = param(std::move(name), ParamKind::number, default_value.is_null(), std::move(default_value));
  p.minimum = 0.0;
  p.exclusive_minimum = true;
  return p;
}

std::string str(const nlohmann::json& config, const char* key, std::string fallback = {}) {
  if (config.contains(key) && config[key].is_string()) return config[key].get<std::string>();
  return fallback;
}

double num(const nlohmann::json& config, const char* key, double fallback) {
  if (config.contains(key) && config[key].is_number()) return config[key].get<double>();
  return fallback;
}

const PartProperty& bound_part(const FunctorInit& init, const std::string& platform,
                               const std::string& part) {
  const PartProperty* prop =
      init.context && init.context->part_property ? init.context->part_property(platform, part) : nullptr;
  if (!prop) {
    throw Error(ErrorCode::PartBindingError,
                "glue '" + init.name + "' references part '" + part + "' not on platform '" + platform + "'");
  }
  return *prop;
}

std::string agent_of(const FunctorInit& init) { return str(init.config, "__agent"); }

// ---------------------------------------------------------------------------
// Glues

class ObserveSensor : public Glue {
 public:
  explicit ObserveSensor(const FunctorInit& init)
      : platform_(str(init.config, "platform")),
        sensor_(str(init.config, "sensor")),
        normalize_(init.config.value("normalization", false)),
        raw_(bound_part(init, platform_, sensor_).space) {
    space_ = raw_;
    if (normalize_) {
      space_.unit = units::none();
      for (std::size_t i = 0; i < raw_.size(); ++i) {
        if (raw_.bounded(i)) {
          space_.low[i] = -1.0;
          space_.high[i] = 1.0;
        }
      }
    }
  }

  ObservationSpace observation_space() const override { return {{kKey, space_}}; }

  Observation observe(const EpisodeState& state) override {
    const Platform* p = state.platform(platform_);
    if (p) {
      const Sensor* s = p->sensor(sensor_);
      if (!s) throw Error(ErrorCode::PartBindingError, "sensor '" + sensor_ + "' missing on '" + platform_ + "'");
      if (s->last_valid()) last_ = *s->last_valid();
    }
    if (!last_) {
      throw Error(ErrorCode::NoValidMeasurementYet, "sensor '" + sensor_ + "' has no valid measurement");
    }
    if (!normalize_) return {{kKey, *last_}};
    std::vector<double> v = last_->values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (raw_.bounded(i)) v[i] = 2.0 * (v[i] - raw_.low[i]) / (raw_.high[i] - raw_.low[i]) - 1.0;
    }
    return {{kKey, Quantity(std::move(v), units::none())}};
  }

  void reset_episode() override { last_.reset(); }

 private:
  std::string platform_;
  std::string sensor_;
  bool normalize_;
  Box raw_;
  Box space_;
  std::optional<Quantity> last_;
};

class ControllerGlue : public Glue {
 public:
  explicit ControllerGlue(const FunctorInit& init)
      : platform_(str(init.config, "platform")),
        controller_(str(init.config, "controller")),
        space_(bound_part(init, platform_, controller_).space) {}

  ObservationSpace observation_space() const override { return {}; }
  Observation observe(const EpisodeState&) override { return {}; }
  std::optional<Box> action_space() const override { return space_; }

  void apply_action(const Quantity& action, Simulator& sim) override {
    Platform* p = sim.platform(platform_);
    if (!p) return;
    Controller* c = p->controller(controller_);
    if (!c) throw Error(ErrorCode::PartBindingError, "controller '" + controller_ + "' missing on '" + platform_ + "'");
    c->apply(*p, action);
  }

 private:
  std::string platform_;
  std::string controller_;
  Box space_;
};

Box limit_space(const nlohmann::json& config, std::size_t n, Unit unit) {
  Box b = Box::unbounded(n, unit);
  if (config.contains("limit") && config["limit"].is_object()) {
    const auto& lim = config["limit"];
    for (std::size_t i = 0; i < n; ++i) {
      b.low[i] = num(lim, "minimum", -kInf);
      b.high[i] = num(lim, "maximum", kInf);
    }
  }
  return b;
}

class TargetValueDifference : public Glue {
 public:
  explicit TargetValueDifference(const FunctorInit& init)
      : source_(init.only_child(), extractor_spec(init)),
        out_unit_(init.config.contains("unit") ? parse_unit(str(init.config, "unit")) : source_.unit()) {
    if (!check_compatibility(out_unit_, source_.unit())) {
      throw Error(ErrorCode::DimensionMismatch,
                  "glue '" + init.name + "': unit " + std::string(out_unit_.name()) +
                      " does not match wrapped observation unit " + std::string(source_.unit().name()));
    }
    target_ = QuantitySource::from(init, "target_value", source_.unit(), Quantity(0.0, source_.unit()));
    space_ = limit_space(init.config, 1, out_unit_);
  }

  ObservationSpace observation_space() const override { return {{kKey, space_}}; }

  Observation observe(const EpisodeState& state) override {
    const double value = source_.value(state).scalar();
    const double target = target_.scalar(state);
    return {{kKey, Quantity(convert_value(target - value, source_.unit(), out_unit_), out_unit_)}};
  }

 private:
  static std::optional<ExtractorSpec> extractor_spec(const FunctorInit& init) {
    ExtractorSpec spec = init.extractor.value_or(ExtractorSpec{});
    if (!spec.index) spec.index = static_cast<std::size_t>(init.config.value("index", 0));
    return spec;
  }

  Extractor source_;
  Unit out_unit_;
  QuantitySource target_;
  Box space_;
};

class Norm : public Glue {
 public:
  explicit Norm(const FunctorInit& init) : source_(init.only_child(), init.extractor) {}

  ObservationSpace observation_space() const override {
    return {{kKey, Box{{0.0}, {kInf}, source_.unit()}}};
  }

  Observation observe(const EpisodeState& state) override {
    double s = 0.0;
    for (double v : source_.value(state).values()) s += v * v;
    return {{kKey, Quantity(std::sqrt(s), source_.unit())}};
  }

 private:
  Extractor source_;
};

class UnitVector : public Glue {
 public:
  explicit UnitVector(const FunctorInit& init) : source_(init.only_child(), init.extractor) {}

  ObservationSpace observation_space() const override {
    return {{kKey, Box::uniform(source_.space().size(), -1.0, 1.0, units::none())}};
  }

  Observation observe(const EpisodeState& state) override {
    std::vector<double> v = source_.value(state).values();
    double s = 0.0;
    for (double x : v) s += x * x;
    const double n = std::sqrt(s);
    for (double& x : v) x = n > 0.0 ? x / n : 0.0;
    return {{kKey, Quantity(std::move(v), units::none())}};
  }

 private:
  Extractor source_;
};

class Projection : public Glue {
 public:
  explicit Projection(const FunctorInit& init) : source_(init.only_child(), init.extractor) {
    axis_ = init.config.at("axis").get<std::vector<double>>();
    if (axis_.size() != source_.space().size()) {
      throw Error(ErrorCode::InvalidValue, "glue '" + init.name + "': axis has " +
                                               std::to_string(axis_.size()) + " elements, observation has " +
                                               std::to_string(source_.space().size()));
    }
    double s = 0.0;
    for (double a : axis_) s += a * a;
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidValue, "glue '" + init.name + "': zero projection axis");
    for (double& a : axis_) a /= std::sqrt(s);
  }

  ObservationSpace observation_space() const override {
    return {{kKey, Box::unbounded(1, source_.unit())}};
  }

  Observation observe(const EpisodeState& state) override {
    const auto v = source_.value(state).values();
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * axis_[i];
    return {{kKey, Quantity(dot, source_.unit())}};
  }

 private:
  Extractor source_;
  std::vector<double> axis_;
};

class Difference : public Glue {
 public:
  explicit Difference(const FunctorInit& init)
      : a_(init.children.at(0), init.extractor), b_(init.children.at(1), init.extractor) {
    if (!check_compatibility(a_.unit(), b_.unit())) {
      throw Error(ErrorCode::DimensionMismatch, "glue '" + init.name + "': cannot subtract " +
                                                    std::string(b_.unit().name()) + " from " +
                                                    std::string(a_.unit().name()));
    }
    if (a_.space().size() != b_.space().size()) {
      throw Error(ErrorCode::InvalidValue, "glue '" + init.name + "': operands differ in size");
    }
  }

  ObservationSpace observation_space() const override {
    return {{kKey, Box::unbounded(a_.space().size(), a_.unit())}};
  }

  Observation observe(const EpisodeState& state) override {
    const Quantity a = a_.value(state);
    const Quantity b = convert(b_.value(state), a_.unit());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
    return {{kKey, Quantity(std::move(d), a_.unit())}};
  }

 private:
  Extractor a_;
  Extractor b_;
};

class Wrapper : public Glue {
 public:
  explicit Wrapper(const FunctorInit& init) {
    for (const auto& c : init.children) {
      const std::string prefix = c.role.empty() ? std::string() : c.role + "/";
      for (const auto& [key, box] : c.glue->observation_space()) {
        space_.emplace(prefix + key, box);
        entries_.push_back({c.node, key, prefix + key});
      }
    }
  }

  ObservationSpace observation_space() const override { return space_; }

  Observation observe(const EpisodeState& state) override {
    Observation out;
    for (const auto& e : entries_) out.emplace(e.out_key, state.output(e.node).at(e.key));
    return out;
  }

 private:
  struct Entry {
    std::size_t node;
    std::string key;
    std::string out_key;
  };
  ObservationSpace space_;
  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Dones

DoneStatusCode status_param(const FunctorInit& init, const char* key, DoneStatusCode fallback) {
  const std::string s = str(init.config, key);
  if (s.empty()) return fallback;
  auto code = done_status_from_string(s);
  if (!code) throw Error(ErrorCode::InvalidValue, "done '" + init.name + "': unknown status '" + s + "'");
  return *code;
}

class EpisodeHorizon : public Done {
 public:
  explicit EpisodeHorizon(const FunctorInit& init) : name_(init.name) {
    if (init.config.contains("horizon") && init.config["horizon"].is_number()) {
      horizon_ = init.config["horizon"].get<std::size_t>();
    }
  }

  std::optional<DoneResult> evaluate(const EpisodeState& state) override {
    const std::size_t h = horizon_ ? *horizon_ : state.horizon;
    if (h > 0 && state.step >= h) return DoneResult{DoneStatusCode::DRAW, true, name_};
    return std::nullopt;
  }

 private:
  std::string name_;
  std::optional<std::size_t> horizon_;
};

class StateBounds : public Done {
 public:
  explicit StateBounds(const FunctorInit& init)
      : name_(init.name), platform_(str(init.config, "platform")),
        status_(status_param(init, "status", DoneStatusCode::LOSS)) {
    for (const auto& b : init.config.at("bounds")) {
      Bound bound;
      bound.state = b.at("state").get<std::string>();
      if (b.contains("low")) bound.low = quantity_from_json(b["low"]);
      if (b.contains("high")) bound.high = quantity_from_json(b["high"]);
      bound.index = b.value("index", std::size_t{0});
      bounds_.push_back(std::move(bound));
    }
  }

  std::optional<DoneResult> evaluate(const EpisodeState& state) override {
    const Platform* p = state.platform(platform_);
    if (!p) return std::nullopt;
    for (const auto& b : bounds_) {
      auto v = p->state_value(b.state);
      if (!v) throw Error(ErrorCode::UnknownReference, "done '" + name_ + "': platform has no state '" + b.state + "'");
      if (b.index >= v->size()) {
        throw Error(ErrorCode::InvalidValue, "done '" + name_ + "': index out of range for '" + b.state + "'");
      }
      const double x = (*v)[b.index];
      const auto in_unit = [&](const Quantity& q) {
        return q.unit() == units::none() ? q.scalar() : convert_value(q.scalar(), q.unit(), v->unit());
      };
      const bool out = (b.low && x < in_unit(*b.low)) || (b.high && x > in_unit(*b.high)) || !std::isfinite(x);
      if (out) return DoneResult{status_, false, name_};
    }
    return std::nullopt;
  }

 private:
  struct Bound {
    std::string state;
    std::optional<Quantity> low;
    std::optional<Quantity> high;
    std::size_t index = 0;
  };
  std::string name_;
  std::string platform_;
  DoneStatusCode status_;
  std::vector<Bound> bounds_;
};

class DockingDone : public Done {
 public:
  DockingDone(const FunctorInit& init, bool success)
      : name_(init.name), platform_(str(init.config, "platform")), success_(success),
        radius_(QuantitySource::from(init, "dock_radius", units::meter())),
        max_velocity_(QuantitySource::from(init, "max_velocity", units::meter_per_second())) {}

  std::optional<DoneResult> evaluate(const EpisodeState& state) override {
    const Platform* p = state.platform(platform_);
    if (!p) return std::nullopt;
    auto x = p->state_value("position");
    auto v = p->state_value("velocity");
    if (!x || !v) {
      throw Error(ErrorCode::UnknownReference, "done '" + name_ + "' needs position and velocity state");
    }
    const double pos = std::abs(convert(*x, units::meter()).scalar());
    const double vel = std::abs(convert(*v, units::meter_per_second()).scalar());
    if (pos > radius_.scalar(state)) return std::nullopt;
    const bool slow = vel <= max_velocity_.scalar(state);
    if (success_ && slow) return DoneResult{DoneStatusCode::WIN, false, name_};
    if (!success_ && !slow) return DoneResult{DoneStatusCode::LOSS, false, name_};
    return std::nullopt;
  }

 private:
  std::string name_;
  std::string platform_;
  bool success_;
  QuantitySource radius_;
  QuantitySource max_velocity_;
};

// ---------------------------------------------------------------------------
// Rewards

class ConstantStepReward : public Reward {
 public:
  explicit ConstantStepReward(const FunctorInit& init)
      : agent_(agent_of(init)), value_(num(init.config, "value", 1.0)) {}

  double evaluate(const EpisodeState& state) override {
    return state.done_for(agent_) ? 0.0 : value_;
  }

 private:
  std::string agent_;
  double value_;
};

class DoneStatusReward : public Reward {
 public:
  explicit DoneStatusReward(const FunctorInit& init) : agent_(agent_of(init)) {
    for (auto c : {DoneStatusCode::WIN, DoneStatusCode::PARTIAL_WIN, DoneStatusCode::DRAW,
                   DoneStatusCode::PARTIAL_LOSS, DoneStatusCode::LOSS}) {
      std::string key(to_string(c));
      for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      values_[c] = num(init.config, key.c_str(), 0.0);
    }
  }

  double evaluate(const EpisodeState& state) override {
    const DoneResult* d = state.done_for(agent_);
    return d ? values_.at(d->code) : 0.0;
  }

 private:
  std::string agent_;
  std::map<DoneStatusCode, double> values_;
};

class ExponentialDecayFromTargetValue : public Reward {
 public:
  explicit ExponentialDecayFromTargetValue(const FunctorInit& init)
      : source_(init.only_child(), init.extractor),
        eps_(num(init.config, "eps", 1.0)),
        scale_(num(init.config, "scale", 1.0)),
        farther_(num(init.config, "reward_when_farther", 0.0)) {
    target_ = QuantitySource::from(init, "target_value", source_.unit(), Quantity(0.0, source_.unit()));
  }

  double evaluate(const EpisodeState& state) override {
    const Quantity v = source_.value(state);
    const Quantity t = target_.get(state);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d = v[i] - (t.size() == 1 ? t[0] : t[i]);
      s += d * d;
    }
    const double d = std::sqrt(s);
    double r = scale_ * std::exp(-d / eps_);
    if (previous_ && d > *previous_) r *= farther_;
    previous_ = d;
    return r;
  }

  void reset_episode() override { previous_.reset(); }

 private:
  Extractor source_;
  double eps_;
  double scale_;
  double farther_;
  QuantitySource target_;
  std::optional<double> previous_;
};

template <class T>
FunctorFactory make() {
  return [](const FunctorInit& init) -> std::unique_ptr<Functor> { return std::make_unique<T>(init); };
}

constexpr std::size_t kMany = SIZE_MAX;

}  // namespace

void register_builtin_functors(FunctorRegistry& r) {
  const ParamSchema platform = param("platform", ParamKind::string);
  const ParamSchema limit = param("limit", ParamKind::any);

  r.add("ObserveSensor", {FunctorKind::glue,
                          {param("sensor", ParamKind::string, true),
                           param("normalization", ParamKind::boolean, false, false), platform},
                          make<ObserveSensor>(), 0, 0, true});
  r.add("ControllerGlue", {FunctorKind::glue, {param("controller", ParamKind::string, true), platform},
                           make<ControllerGlue>(), 0, 0, true});
  r.add("TargetValueDifference",
        {FunctorKind::glue,
         // target_value takes the wrapped observation's dimension, checked at build.
         {param("target_value", ParamKind::quantity), param("index", ParamKind::integer, false, 0),
          param("unit", ParamKind::string), limit},
         make<TargetValueDifference>(), 1, 1, false});
  r.add("UnitVector", {FunctorKind::glue, {}, make<UnitVector>(), 1, 1, false});
  r.add("Norm", {FunctorKind::glue, {}, make<Norm>(), 1, 1, false});
  r.add("Projection", {FunctorKind::glue, {param("axis", ParamKind::number_list, true)},
                       make<Projection>(), 1, 1, false});
  r.add("Difference", {FunctorKind::glue, {}, make<Difference>(), 2, 2, false});
  r.add("Wrapper", {FunctorKind::glue, {}, make<Wrapper>(), 1, kMany, false});

  {
    ParamSchema h = param("horizon", ParamKind::integer);
    h.minimum = 1.0;
    r.add("EpisodeHorizon", {FunctorKind::done, {h}, make<EpisodeHorizon>(), 0, 0, false});
  }
  r.add("StateBounds", {FunctorKind::done,
                        {param("bounds", ParamKind::any, true), param("status", ParamKind::string, false, "LOSS"),
                         platform},
                        make<StateBounds>(), 0, 0, true});
  const Schema docking = {quantity("dock_radius", Dimension::length, true),
                          quantity("max_velocity", Dimension::velocity, true), platform};
  r.add("DockingSuccess", {FunctorKind::done, docking,
                           [](const FunctorInit& i) -> std::unique_ptr<Functor> {
                             return std::make_unique<DockingDone>(i, true);
                           },
                           0, 0, true});
  r.add("DockingFailure", {FunctorKind::done, docking,
                           [](const FunctorInit& i) -> std::unique_ptr<Functor> {
                             return std::make_unique<DockingDone>(i, false);
                           },
                           0, 0, true});

  r.add("ConstantStepReward", {FunctorKind::reward, {param("value", ParamKind::number, false, 1.0)},
                               make<ConstantStepReward>(), 0, 0, false});
  r.add("DoneStatusReward", {FunctorKind::reward,
                             {param("win", ParamKind::number, false, 0.0),
                              param("partial_win", ParamKind::number, false, 0.0),
                              param("draw", ParamKind::number, false, 0.0),
                              param("partial_loss", ParamKind::number, false, 0.0),
                              param("loss", ParamKind::number, false, 0.0)},
                             make<DoneStatusReward>(), 0, 0, false});
  r.add("ExponentialDecayFromTargetValue",
        {FunctorKind::reward,
         {param("target_value", ParamKind::quantity), positive("eps"),
          param("scale", ParamKind::number, false, 1.0),
          param("reward_when_farther", ParamKind::number, false, 0.0)},
         make<ExponentialDecayFromTargetValue>(), 1, 1, false});
}

}  // namespace envforge
