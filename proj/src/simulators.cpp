#include "envforge/simulators.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "envforge/error.hpp"

namespace envforge {

Simulator::Simulator(double frame_rate) : frame_rate_(frame_rate) {
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) {
    throw std::invalid_argument("frame_rate must be a positive finite number");
  }
}

Platform* Simulator::platform(const std::string& name) {
  auto it = platforms_.find(name);
  return it == platforms_.end() ? nullptr : it->second.get();
}

const Platform* Simulator::platform(const std::string& name) const {
  auto it = platforms_.find(name);
  return it == platforms_.end() ? nullptr : it->second.get();
}

void Simulator::reset(const std::vector<PlatformInit>& inits, const PartBinder& binder) {
  platforms_.clear();
  removed_.clear();
  steps_ = 0;
  for (const auto& init : inits) {
    auto p = build_platform(init);
    if (binder) binder(*p);
    platforms_.insert_or_assign(init.name, std::move(p));
  }
  for (auto& [name, p] : platforms_) p->refresh_sensors();
}

void Simulator::step() {
  advance(dt());
  ++steps_;
  for (auto& [name, p] : platforms_) {
    p->clear_actions();
    p->refresh_sensors();
  }
}

void Simulator::mark_platform_inoperable(const std::string& name) {
  auto* p = platform(name);
  if (!p) throw Error(ErrorCode::UnknownPlatform, "no platform named '" + name + "'");
  p->set_operable(false);
  p->clear_actions();
}

void Simulator::remove_platform(const std::string& name) {
  if (platforms_.erase(name) == 0) {
    throw Error(ErrorCode::UnknownPlatform, "no platform named '" + name + "'");
  }
  removed_.push_back(name);
}

std::vector<std::string> Simulator::take_removed_platforms() {
  std::vector<std::string> out;
  out.swap(removed_);
  return out;
}

nlohmann::json Simulator::state() const {
  return {{"sim_time", sim_time()}, {"frame_rate", frame_rate_}, {"steps", steps_}};
}

double init_parameter(const PlatformInit& init, const std::string& key, Unit unit) {
  auto it = init.parameters.find(key);
  if (it == init.parameters.end()) {
    throw Error(ErrorCode::MissingInitParameter,
                "platform '" + init.name + "' requires init parameter '" + key + "'");
  }
  return convert(it->second, unit).scalar();
}

double init_parameter_or(const PlatformInit& init, const std::string& key, Unit unit,
                         double fallback) {
  if (init.parameters.count(key) == 0) return fallback;
  return init_parameter(init, key, unit);
}

// ---------------------------------------------------------------------------

namespace {

// Neumaier compensated accumulation of `term` into (sum, residual).
void accumulate(double& sum, double& residual, double term) noexcept {
  const double t = sum + term;
  if (std::abs(sum) >= std::abs(term)) {
    residual += (sum - t) + term;
  } else {
    residual += (term - t) + sum;
  }
  sum = t;
}

}  // namespace

void docking_step(Deputy1d& deputy, double thrust, double dt) noexcept {
  const double accel = thrust / deputy.mass;
  const double v0 = deputy.xdot();
  accumulate(deputy.position, deputy.position_residual, v0 * dt + 0.5 * accel * dt * dt);
  accumulate(deputy.velocity, deputy.velocity_residual, accel * dt);
  deputy.thrust = thrust;
}

const Schema& Docking1dConfig::schema() {
  static const Schema s = {
      {"frame_rate", ParamKind::number, false, 1.0, std::nullopt, 0.0, true},
      {"mass", ParamKind::number, false, 12.0, std::nullopt, 0.0, true},
  };
  return s;
}

Docking1dConfig Docking1dConfig::from_json(const nlohmann::json& config) {
  const auto c = apply_defaults(schema(), config);
  Docking1dConfig out;
  out.frame_rate = c.at("frame_rate").get<double>();
  out.mass = c.at("mass").get<double>();
  return out;
}

Docking1dPlatform::Docking1dPlatform(std::string name, Deputy1d deputy)
    : Platform(std::move(name), std::string(Docking1dSimulator::kPlatformType)), deputy_(deputy) {}

std::map<std::string, Quantity> Docking1dPlatform::state() const {
  return {
      {"position", Quantity(deputy_.x(), units::meter())},
      {"velocity", Quantity(deputy_.xdot(), units::meter_per_second())},
      {"mass", Quantity(deputy_.mass, units::kilogram())},
      {"thrust", Quantity(deputy_.thrust, units::newton())},
  };
}

Docking1dSimulator::Docking1dSimulator(Docking1dConfig config)
    : Simulator(config.frame_rate), config_(config) {}

std::unique_ptr<Platform> Docking1dSimulator::build_platform(const PlatformInit& init) {
  if (init.platform_type != kPlatformType) {
    throw Error(ErrorCode::InvalidValue, std::string(kType) + " cannot build platform type '" +
                                             init.platform_type + "'");
  }
  Deputy1d deputy;
  deputy.position = init_parameter(init, "x0", units::meter());
  deputy.velocity = init_parameter(init, "xdot0", units::meter_per_second());
  deputy.mass = init_parameter_or(init, "mass", units::kilogram(), config_.mass);
  if (!(deputy.mass > 0.0)) {
    throw Error(ErrorCode::InvalidValue, "platform '" + init.name + "': mass must be > 0");
  }
  return std::make_unique<Docking1dPlatform>(init.name, deputy);
}

void Docking1dSimulator::advance(double dt) {
  for (const auto& [name, p] : platforms()) {
    auto& platform = static_cast<Docking1dPlatform&>(*p);
    double thrust = 0.0;
    if (platform.operable()) {
      if (const Quantity* a = platform.action("force")) thrust = convert(*a, units::newton()).scalar();
    }
    docking_step(platform.deputy(), thrust, dt);
  }
}

// ---------------------------------------------------------------------------

const Schema& CartPoleConstants::schema() {
  static const CartPoleConstants d{};
  static const Schema s = {
      {"frame_rate", ParamKind::number, false, d.frame_rate, std::nullopt, 0.0, true},
      {"gravity", ParamKind::number, false, d.gravity},
      {"mass_cart", ParamKind::number, false, d.mass_cart, std::nullopt, 0.0, true},
      {"mass_pole", ParamKind::number, false, d.mass_pole, std::nullopt, 0.0, true},
      {"half_length", ParamKind::number, false, d.half_length, std::nullopt, 0.0, true},
      {"force_mag", ParamKind::number, false, d.force_mag, std::nullopt, 0.0, true},
      {"x_threshold", ParamKind::number, false, d.x_threshold, std::nullopt, 0.0, true},
      {"theta_threshold", ParamKind::quantity, false,
       nlohmann::json{{"value", 12.0}, {"unit", "degree"}}, Dimension::angle},
  };
  return s;
}

CartPoleConstants CartPoleConstants::from_json(const nlohmann::json& config) {
  const auto c = apply_defaults(schema(), config);
  CartPoleConstants out;
  out.frame_rate = c.at("frame_rate").get<double>();
  out.gravity = c.at("gravity").get<double>();
  out.mass_cart = c.at("mass_cart").get<double>();
  out.mass_pole = c.at("mass_pole").get<double>();
  out.half_length = c.at("half_length").get<double>();
  out.force_mag = c.at("force_mag").get<double>();
  out.x_threshold = c.at("x_threshold").get<double>();
  out.theta_threshold = scalar_param(c, "theta_threshold", units::radian());
  return out;
}

CartPoleState cartpole_step(const CartPoleState& s, double force, const CartPoleConstants& c,
                            double dt) noexcept {
  const double total_mass = c.mass_cart + c.mass_pole;
  const double pole_mass_length = c.mass_pole * c.half_length;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp = (force + pole_mass_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (c.gravity * sin_t - cos_t * temp) /
      (c.half_length * (4.0 / 3.0 - c.mass_pole * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;

  CartPoleState next;
  next.x = s.x + dt * s.x_dot;
  next.x_dot = s.x_dot + dt * x_acc;
  next.theta = s.theta + dt * s.theta_dot;
  next.theta_dot = s.theta_dot + dt * theta_acc;
  next.force = force;
  return next;
}

double cartpole_energy(const CartPoleState& s, const CartPoleConstants& c) noexcept {
  const double l = c.half_length;
  const double vx = s.x_dot + l * s.theta_dot * std::cos(s.theta);
  const double vy = -l * s.theta_dot * std::sin(s.theta);
  const double kinetic = 0.5 * c.mass_cart * s.x_dot * s.x_dot +
                         0.5 * c.mass_pole * (vx * vx + vy * vy) +
                         0.5 * (c.mass_pole * l * l / 3.0) * s.theta_dot * s.theta_dot;
  const double potential = c.mass_pole * c.gravity * l * std::cos(s.theta);
  return kinetic + potential;
}

CartPolePlatform::CartPolePlatform(std::string name, CartPoleState state)
    : Platform(std::move(name), std::string(CartPoleSimulator::kPlatformType)), state_(state) {}

std::map<std::string, Quantity> CartPolePlatform::state() const {
  return {
      {"cart_position", Quantity(state_.x, units::meter())},
      {"cart_velocity", Quantity(state_.x_dot, units::meter_per_second())},
      {"pole_angle", Quantity(state_.theta, units::radian())},
      {"pole_angular_velocity", Quantity(state_.theta_dot, units::radian_per_second())},
      {"force", Quantity(state_.force, units::newton())},
  };
}

CartPoleSimulator::CartPoleSimulator(CartPoleConstants constants)
    : Simulator(constants.frame_rate), constants_(constants) {}

std::unique_ptr<Platform> CartPoleSimulator::build_platform(const PlatformInit& init) {
  if (init.platform_type != kPlatformType) {
    throw Error(ErrorCode::InvalidValue, std::string(kType) + " cannot build platform type '" +
                                             init.platform_type + "'");
  }
  CartPoleState s;
  s.x = init_parameter_or(init, "x0", units::meter(), 0.0);
  s.x_dot = init_parameter_or(init, "x_dot0", units::meter_per_second(), 0.0);
  s.theta = init_parameter_or(init, "theta0", units::radian(), 0.0);
  s.theta_dot = init_parameter_or(init, "theta_dot0", units::radian_per_second(), 0.0);
  return std::make_unique<CartPolePlatform>(init.name, s);
}

void CartPoleSimulator::advance(double dt) {
  for (const auto& [name, p] : platforms()) {
    auto& platform = static_cast<CartPolePlatform&>(*p);
    double force = 0.0;
    if (platform.operable()) {
      if (const Quantity* a = platform.action("force")) force = convert(*a, units::newton()).scalar();
    }
    platform.cart() = cartpole_step(platform.cart(), force, constants_, dt);
  }
}

// ---------------------------------------------------------------------------

void SimulatorRegistry::add(const std::string& name, SimulatorEntry entry) {
  entries_.insert_or_assign(name, std::move(entry));
}

const SimulatorEntry* SimulatorRegistry::find(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> SimulatorRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, e] : entries_) out.push_back(n);
  return out;
}

SimulatorRegistry builtin_simulators() {
  SimulatorRegistry reg;

  SimulatorEntry docking;
  docking.factory = [](const nlohmann::json& config) -> std::unique_ptr<Simulator> {
    return std::make_unique<Docking1dSimulator>(Docking1dConfig::from_json(config));
  };
  docking.config_schema = Docking1dConfig::schema();
  docking.platform_types = {std::string(Docking1dSimulator::kPlatformType)};
  docking.init_schema[std::string(Docking1dSimulator::kPlatformType)] = {
      {"x0", ParamKind::quantity, true, nullptr, Dimension::length},
      {"xdot0", ParamKind::quantity, true, nullptr, Dimension::velocity},
      {"mass", ParamKind::quantity, false, nullptr, Dimension::mass},
  };
  reg.add(std::string(Docking1dSimulator::kType), std::move(docking));

  SimulatorEntry cartpole;
  cartpole.factory = [](const nlohmann::json& config) -> std::unique_ptr<Simulator> {
    return std::make_unique<CartPoleSimulator>(CartPoleConstants::from_json(config));
  };
  cartpole.config_schema = CartPoleConstants::schema();
  cartpole.platform_types = {std::string(CartPoleSimulator::kPlatformType)};
  cartpole.init_schema[std::string(CartPoleSimulator::kPlatformType)] = {
      {"x0", ParamKind::quantity, false, nullptr, Dimension::length},
      {"x_dot0", ParamKind::quantity, false, nullptr, Dimension::velocity},
      {"theta0", ParamKind::quantity, false, nullptr, Dimension::angle},
      {"theta_dot0", ParamKind::quantity, false, nullptr, Dimension::angular_velocity},
  };
  reg.add(std::string(CartPoleSimulator::kType), std::move(cartpole));
  return reg;
}

// ---------------------------------------------------------------------------
// Built-in parts

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDefaultMaxThrust = 1.0;  // newton

/// Reads a fixed list of platform state keys. Values are taken in the base
/// unit of each key's dimension; a state key the platform does not expose
/// yields a NaN entry, which the value hold treats as malformed.
class StateSensor final : public Sensor {
 public:
  StateSensor(std::string name, PartProperty property, std::vector<std::string> keys)
      : Sensor(std::move(name), std::move(property)), keys_(std::move(keys)) {}

 protected:
  Quantity read(const Platform& platform) const override {
    const auto state = platform.state();
    const Unit unit = property().space.unit;
    std::vector<double> values;
    values.reserve(keys_.size());
    for (const auto& key : keys_) {
      auto it = state.find(key);
      if (it == state.end()) {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const Quantity& q = it->second;
      if (unit == units::none()) {
        values.push_back(convert(q, base_unit(q.unit().dimension())).scalar());
      } else if (check_compatibility(q.unit(), unit)) {
        values.push_back(convert(q, unit).scalar());
      } else {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    return Quantity(std::move(values), unit);
  }

 private:
  std::vector<std::string> keys_;
};

std::vector<double> bounds_override(const nlohmann::json& config, const char* key,
                                    std::vector<double> fallback) {
  if (!config.is_object() || !config.contains(key)) return fallback;
  const auto& v = config.at(key);
  if (v.is_number()) return std::vector<double>(fallback.size(), v.get<double>());
  if (v.is_array() && v.size() == fallback.size()) {
    std::vector<double> out;
    for (const auto& e : v) out.push_back(e.is_null() ? (key[0] == 'l' ? -kInf : kInf) : e.get<double>());
    return out;
  }
  throw Error(ErrorCode::TypeMismatch, std::string("part bound '") + key +
                                           "' must be a number or a list of " +
                                           std::to_string(fallback.size()) + " numbers");
}

PartFactory state_sensor(std::vector<std::string> keys, Box space) {
  return [keys = std::move(keys), space = std::move(space)](
             const std::string& name, const nlohmann::json& config) -> std::unique_ptr<Part> {
    Box s = space;
    s.low = bounds_override(config, "low", s.low);
    s.high = bounds_override(config, "high", s.high);
    return std::make_unique<StateSensor>(name, PartProperty{name, std::move(s)}, keys);
  };
}

PartFactory force_controller(double default_max) {
  return [default_max](const std::string& name, const nlohmann::json& config) -> std::unique_ptr<Part> {
    double max = default_max;
    if (config.is_object() && config.contains("max")) {
      const auto& m = config.at("max");
      max = m.is_number() ? m.get<double>() : convert(quantity_from_json(m), units::newton()).scalar();
    }
    Box s = Box::uniform(1, -max, max, units::newton());
    s.low = bounds_override(config, "low", s.low);
    s.high = bounds_override(config, "high", s.high);
    return std::make_unique<Controller>(name, PartProperty{name, std::move(s)}, "force");
  };
}

}  // namespace

void register_builtin_parts(PluginRegistry& registry) {
  const std::string dock_sim(Docking1dSimulator::kType);
  const std::string dock_plat(Docking1dSimulator::kPlatformType);
  const std::string cp_sim(CartPoleSimulator::kType);
  const std::string cp_plat(CartPoleSimulator::kPlatformType);
  const CartPoleConstants cp{};

  registry.register_part(
      "Sensor_State", {cp_sim, cp_plat},
      state_sensor({"cart_position", "cart_velocity", "pole_angle", "pole_angular_velocity"},
                   Box{{-2.0 * cp.x_threshold, -kInf, -2.0 * cp.theta_threshold, -kInf},
                       {2.0 * cp.x_threshold, kInf, 2.0 * cp.theta_threshold, kInf},
                       units::none()}));
  registry.register_part("Sensor_State", {dock_sim, dock_plat},
                         state_sensor({"position", "velocity"}, Box::unbounded(2, units::none())));

  registry.register_part("Sensor_Position", {dock_sim, dock_plat},
                         state_sensor({"position"}, Box::unbounded(1, units::meter())));
  registry.register_part("Sensor_Position", {cp_sim, cp_plat},
                         state_sensor({"cart_position"}, Box::unbounded(1, units::meter())));

  registry.register_part("Sensor_Velocity", {dock_sim, dock_plat},
                         state_sensor({"velocity"}, Box::unbounded(1, units::meter_per_second())));
  registry.register_part("Sensor_Velocity", {cp_sim, cp_plat},
                         state_sensor({"cart_velocity"}, Box::unbounded(1, units::meter_per_second())));

  registry.register_part("Sensor_PoleAngle", {cp_sim, cp_plat},
                         state_sensor({"pole_angle"}, Box::unbounded(1, units::radian())));

  registry.register_part("Controller_Force", {dock_sim, dock_plat},
                         force_controller(kDefaultMaxThrust));
  registry.register_part("Controller_Force", {cp_sim, cp_plat}, force_controller(cp.force_mag));
}

}  // namespace envforge
