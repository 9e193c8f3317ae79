#pragma once

// Simulator contract and the two built-in simulators: a native cart-pole and
// the one-dimensional docking double integrator.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "envforge/parts.hpp"
#include "envforge/schema.hpp"
#include "envforge/units.hpp"
#include "json.hpp"

namespace envforge {

struct PlatformInit {
  std::string name;
  std::string platform_type;
  std::map<std::string, Quantity> parameters;
};

/// Called once per platform during reset, after the platform is built and
/// before the first sensor refresh. The environment attaches parts here.
using PartBinder = std::function<void(Platform&)>;

class Simulator {
 public:
  /// Throws std::invalid_argument unless frame_rate > 0.
  explicit Simulator(double frame_rate);
  virtual ~Simulator() = default;
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  virtual std::string_view type() const noexcept = 0;
  virtual std::vector<std::string> platform_types() const = 0;

  double frame_rate() const noexcept { return frame_rate_; }
  double dt() const noexcept { return 1.0 / frame_rate_; }
  std::size_t steps() const noexcept { return steps_; }
  double sim_time() const noexcept { return static_cast<double>(steps_) / frame_rate_; }

  const std::map<std::string, std::unique_ptr<Platform>>& platforms() const noexcept {
    return platforms_;
  }
  Platform* platform(const std::string& name);
  const Platform* platform(const std::string& name) const;

  /// Rebuilds every platform from `inits`, binds parts, zeroes sim_time and
  /// populates the initial sensor measurements.
  void reset(const std::vector<PlatformInit>& inits, const PartBinder& binder = {});

  /// Applies the platforms' stored actions, advances by dt, clears the action
  /// buffers and refreshes sensors.
  void step();

  /// Throws Error(UnknownPlatform).
  void mark_platform_inoperable(const std::string& name);
  void remove_platform(const std::string& name);
  /// Names removed since the previous call.
  std::vector<std::string> take_removed_platforms();

  nlohmann::json state() const;

 protected:
  /// Throws Error(MissingInitParameter) when a required parameter is absent.
  virtual std::unique_ptr<Platform> build_platform(const PlatformInit& init) = 0;
  virtual void advance(double dt) = 0;

 private:
  double frame_rate_;
  std::size_t steps_ = 0;
  std::map<std::string, std::unique_ptr<Platform>> platforms_;
  std::vector<std::string> removed_;
};

/// Looks up a required init parameter converted to `unit`.
double init_parameter(const PlatformInit& init, const std::string& key, Unit unit);
/// As init_parameter, with a fallback when absent.
double init_parameter_or(const PlatformInit& init, const std::string& key, Unit unit,
                         double fallback);

// ---------------------------------------------------------------------------
// 1D docking

/// Entity of the docking simulation. Position and velocity are accumulated
/// with compensated summation so long constant-thrust runs stay on the
/// analytic solution.
struct Deputy1d {
  double position = 0.0;      // meter
  double velocity = 0.0;      // meter_per_second
  double mass = 1.0;          // kilogram
  double thrust = 0.0;        // newton, last applied command
  double position_residual = 0.0;
  double velocity_residual = 0.0;

  double x() const noexcept { return position + position_residual; }
  double xdot() const noexcept { return velocity + velocity_residual; }
};

/// Exact discrete solution of xdd = T/m over one interval of length dt with
/// zero-order-hold thrust.
void docking_step(Deputy1d& deputy, double thrust, double dt) noexcept;

struct Docking1dConfig {
  double frame_rate = 1.0;
  double mass = 12.0;        // kilogram, used when the platform sets no `mass` init

  static const Schema& schema();
  static Docking1dConfig from_json(const nlohmann::json& config);
};

class Docking1dPlatform : public Platform {
 public:
  Docking1dPlatform(std::string name, Deputy1d deputy);

  Deputy1d& deputy() noexcept { return deputy_; }
  const Deputy1d& deputy() const noexcept { return deputy_; }
  std::map<std::string, Quantity> state() const override;

 private:
  Deputy1d deputy_;
};

class Docking1dSimulator : public Simulator {
 public:
  static constexpr std::string_view kType = "Docking1dSimulator";
  static constexpr std::string_view kPlatformType = "Docking1dPlatform";

  explicit Docking1dSimulator(Docking1dConfig config = {});

  std::string_view type() const noexcept override { return kType; }
  std::vector<std::string> platform_types() const override { return {std::string(kPlatformType)}; }
  const Docking1dConfig& config() const noexcept { return config_; }

 protected:
  std::unique_ptr<Platform> build_platform(const PlatformInit& init) override;
  void advance(double dt) override;

 private:
  Docking1dConfig config_;
};

// ---------------------------------------------------------------------------
// Cart-pole (classic Barto-Sutton-Anderson constants, explicit Euler)

struct CartPoleConstants {
  double frame_rate = 50.0;
  double gravity = 9.8;
  double mass_cart = 1.0;
  double mass_pole = 0.1;
  double half_length = 0.5;
  double force_mag = 10.0;
  double x_threshold = 2.4;
  double theta_threshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;

  static const Schema& schema();
  static CartPoleConstants from_json(const nlohmann::json& config);
};

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  double force = 0.0;
};

CartPoleState cartpole_step(const CartPoleState& s, double force, const CartPoleConstants& c,
                            double dt) noexcept;

/// Rigid-rod mechanical energy of the cart-pole (kinetic + potential).
double cartpole_energy(const CartPoleState& s, const CartPoleConstants& c) noexcept;

class CartPolePlatform : public Platform {
 public:
  CartPolePlatform(std::string name, CartPoleState state);

  CartPoleState& cart() noexcept { return state_; }
  const CartPoleState& cart() const noexcept { return state_; }
  std::map<std::string, Quantity> state() const override;

 private:
  CartPoleState state_;
};

class CartPoleSimulator : public Simulator {
 public:
  static constexpr std::string_view kType = "CartPoleSimulator";
  static constexpr std::string_view kPlatformType = "CartPolePlatform";

  explicit CartPoleSimulator(CartPoleConstants constants = {});

  std::string_view type() const noexcept override { return kType; }
  std::vector<std::string> platform_types() const override { return {std::string(kPlatformType)}; }
  const CartPoleConstants& constants() const noexcept { return constants_; }

 protected:
  std::unique_ptr<Platform> build_platform(const PlatformInit& init) override;
  void advance(double dt) override;

 private:
  CartPoleConstants constants_;
};

// ---------------------------------------------------------------------------

using SimulatorFactory = std::function<std::unique_ptr<Simulator>(const nlohmann::json& config)>;

struct SimulatorEntry {
  SimulatorFactory factory;
  Schema config_schema;
  std::vector<std::string> platform_types;
  /// Init parameters per platform type: name -> required/dimension.
  std::map<std::string, Schema> init_schema;
};

class SimulatorRegistry {
 public:
  void add(const std::string& name, SimulatorEntry entry);
  const SimulatorEntry* find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, SimulatorEntry> entries_;
};

/// Registry holding the two built-in simulators.
SimulatorRegistry builtin_simulators();

/// Registers the built-in sensors/controllers for both simulators.
void register_builtin_parts(PluginRegistry& registry);

}  // namespace envforge
