#pragma once

// Platforms, their Sensor/Controller parts, and the condition-matched plugin
// registry that binds part group names to implementations.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "envforge/units.hpp"
#include "json.hpp"

namespace envforge {

/// Per-element bounds with a unit. Infinite bounds mean unbounded.
struct Box {
  std::vector<double> low;
  std::vector<double> high;
  Unit unit = units::none();

  static Box uniform(std::size_t n, double low, double high, Unit unit);
  static Box unbounded(std::size_t n, Unit unit);

  std::size_t size() const noexcept { return low.size(); }
  bool bounded(std::size_t i) const noexcept;
  /// Index of the first element outside the box (after unit conversion), if any.
  std::optional<std::size_t> first_violation(const Quantity& q) const;
  bool contains(const Quantity& q) const { return !first_violation(q).has_value(); }
  Quantity clamp(const Quantity& q) const;

  nlohmann::json to_json() const;
  static Box from_json(const nlohmann::json& j);

  friend bool operator==(const Box&, const Box&) = default;
};

struct PartProperty {
  std::string name;
  Box space;

  std::size_t shape() const noexcept { return space.size(); }
};

class Platform;

class Part {
 public:
  Part(std::string name, PartProperty property);
  virtual ~Part() = default;
  Part(const Part&) = delete;
  Part& operator=(const Part&) = delete;

  const std::string& name() const noexcept { return name_; }
  const PartProperty& property() const noexcept { return property_; }
  virtual bool is_sensor() const noexcept = 0;

 private:
  std::string name_;
  PartProperty property_;
};

class Sensor : public Part {
 public:
  using Part::Part;
  bool is_sensor() const noexcept override { return true; }

  /// Reads the platform and applies the value hold: a malformed reading
  /// (wrong shape, non-finite entry, wrong dimension) returns the last valid
  /// one. Throws Error(NoValidMeasurementYet) if there is none.
  const Quantity& measure(const Platform& platform);

  const std::optional<Quantity>& last_valid() const noexcept { return last_valid_; }
  std::size_t hold_count() const noexcept { return hold_count_; }
  void reset_hold() noexcept;

  /// The reading converted into the property unit, or nullopt when malformed.
  std::optional<Quantity> accept(const Quantity& reading) const;

 protected:
  virtual Quantity read(const Platform& platform) const = 0;

 private:
  std::optional<Quantity> last_valid_;
  std::size_t hold_count_ = 0;
};

class Controller : public Part {
 public:
  /// `channel` is the platform action slot this controller drives.
  Controller(std::string name, PartProperty property, std::string channel);
  bool is_sensor() const noexcept override { return false; }

  /// Converts into the property unit, clamps element-wise to the bounds and
  /// stores the command. Inoperable platforms ignore the command.
  void apply(Platform& platform, const Quantity& command);

  const std::string& channel() const noexcept { return channel_; }
  const std::optional<Quantity>& pending() const noexcept { return pending_; }
  std::size_t clamp_count() const noexcept { return clamp_count_; }
  void reset_diagnostics() noexcept;

 private:
  std::string channel_;
  std::optional<Quantity> pending_;
  std::size_t clamp_count_ = 0;
};

class Platform {
 public:
  Platform(std::string name, std::string platform_type);
  virtual ~Platform() = default;
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  const std::string& name() const noexcept { return name_; }
  const std::string& platform_type() const noexcept { return type_; }
  bool operable() const noexcept { return operable_; }
  void set_operable(bool operable) noexcept { operable_ = operable; }

  /// Throws std::invalid_argument if a part with that name already exists.
  Part& attach(std::unique_ptr<Part> part);
  const Part* part(const std::string& name) const;
  Sensor* sensor(const std::string& name);
  const Sensor* sensor(const std::string& name) const;
  Controller* controller(const std::string& name);
  std::vector<std::string> part_names() const;

  void store_action(const std::string& channel, Quantity value);
  const Quantity* action(const std::string& channel) const;
  void clear_actions() noexcept { actions_.clear(); }

  /// Measures every sensor. Sensors with no valid reading yet keep no value.
  void refresh_sensors();

  /// Named state snapshot used by dones, artifacts and logging.
  virtual std::map<std::string, Quantity> state() const = 0;
  std::optional<Quantity> state_value(const std::string& key) const;

 private:
  std::string name_;
  std::string type_;
  bool operable_ = true;
  std::map<std::string, std::unique_ptr<Part>> parts_;
  std::map<std::string, Quantity> actions_;
};

struct PartConditions {
  std::optional<std::string> simulator_type;
  std::optional<std::string> platform_type;

  bool matches(std::string_view simulator, std::string_view platform) const noexcept;
};

using PartFactory =
    std::function<std::unique_ptr<Part>(const std::string& name, const nlohmann::json& config)>;

class PluginRegistry {
 public:
  /// Throws Error(RegistryFrozen) after freeze().
  void register_part(const std::string& group, PartConditions conditions, PartFactory factory);
  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  bool has_group(const std::string& group) const { return entries_.count(group) != 0; }
  std::vector<std::string> groups() const;
  std::size_t entry_count(const std::string& group) const;

  /// First registered entry whose conditions match. Throws Error(UnknownGroup)
  /// or Error(NoMatch).
  const PartFactory& resolve_part(const std::string& group, std::string_view simulator_type,
                                  std::string_view platform_type) const;

 private:
  struct Entry {
    PartConditions conditions;
    PartFactory factory;
  };
  std::map<std::string, std::vector<Entry>> entries_;
  bool frozen_ = false;
};

}  // namespace envforge
