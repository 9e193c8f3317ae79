#include "envforge/parts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "envforge/error.hpp"

namespace envforge {

namespace {

nlohmann::json bound_to_json(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double bound_from_json(const nlohmann::json& j, double unbounded) {
  if (j.is_null()) return unbounded;
  return j.get<double>();
}

}  // namespace

Box Box::uniform(std::size_t n, double low, double high, Unit unit) {
  return Box{std::vector<double>(n, low), std::vector<double>(n, high), unit};
}

Box Box::unbounded(std::size_t n, Unit unit) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return uniform(n, -inf, inf, unit);
}

bool Box::bounded(std::size_t i) const noexcept {
  return std::isfinite(low[i]) && std::isfinite(high[i]);
}

std::optional<std::size_t> Box::first_violation(const Quantity& q) const {
  const Quantity v = convert(q, unit);
  if (v.size() != size()) return std::min(v.size(), size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v.values()[i];
    if (!(x >= low[i] && x <= high[i])) return i;
  }
  return std::nullopt;
}

Quantity Box::clamp(const Quantity& q) const {
  std::vector<double> v = convert(q, unit).values();
  for (std::size_t i = 0; i < v.size() && i < size(); ++i) v[i] = std::clamp(v[i], low[i], high[i]);
  return Quantity(std::move(v), unit);
}

nlohmann::json Box::to_json() const {
  nlohmann::json lo = nlohmann::json::array();
  nlohmann::json hi = nlohmann::json::array();
  for (std::size_t i = 0; i < size(); ++i) {
    lo.push_back(bound_to_json(low[i]));
    hi.push_back(bound_to_json(high[i]));
  }
  return {{"low", lo}, {"high", hi}, {"unit", std::string(unit.name())}};
}

Box Box::from_json(const nlohmann::json& j) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Box b;
  for (const auto& v : j.at("low")) b.low.push_back(bound_from_json(v, -inf));
  for (const auto& v : j.at("high")) b.high.push_back(bound_from_json(v, inf));
  b.unit = parse_unit(j.at("unit").get<std::string>());
  return b;
}

Part::Part(std::string name, PartProperty property)
    : name_(std::move(name)), property_(std::move(property)) {
  const Box& s = property_.space;
  if (s.low.empty() || s.low.size() != s.high.size()) {
    throw std::invalid_argument("part '" + name_ + "': bounds must be non-empty and equal length");
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!(s.low[i] <= s.high[i])) {
      throw std::invalid_argument("part '" + name_ + "': low > high at element " + std::to_string(i));
    }
  }
}

std::optional<Quantity> Sensor::accept(const Quantity& reading) const {
  const Box& space = property().space;
  if (reading.size() != space.size()) return std::nullopt;
  if (!reading.all_finite()) return std::nullopt;
  if (!check_compatibility(reading.unit(), space.unit)) return std::nullopt;
  return convert(reading, space.unit);
}

const Quantity& Sensor::measure(const Platform& platform) {
  if (auto ok = accept(read(platform))) {
    last_valid_ = std::move(*ok);
    return *last_valid_;
  }
  if (!last_valid_) {
    throw Error(ErrorCode::NoValidMeasurementYet,
                "sensor '" + name() + "' on platform '" + platform.name() +
                    "' produced a malformed reading before any valid one");
  }
  ++hold_count_;
  return *last_valid_;
}

void Sensor::reset_hold() noexcept {
  last_valid_.reset();
  hold_count_ = 0;
}

Controller::Controller(std::string name, PartProperty property, std::string channel)
    : Part(std::move(name), std::move(property)), channel_(std::move(channel)) {}

void Controller::apply(Platform& platform, const Quantity& command) {
  const Box& space = property().space;
  const Quantity converted = convert(command, space.unit);
  if (converted.size() != space.size()) {
    throw Error(ErrorCode::SpaceViolation, "controller '" + name() + "' expects " +
                                               std::to_string(space.size()) + " values, got " +
                                               std::to_string(converted.size()));
  }
  if (space.first_violation(converted)) ++clamp_count_;
  Quantity clamped = space.clamp(converted);
  if (!platform.operable()) return;
  pending_ = clamped;
  platform.store_action(channel_, std::move(clamped));
}

void Controller::reset_diagnostics() noexcept {
  pending_.reset();
  clamp_count_ = 0;
}

Platform::Platform(std::string name, std::string platform_type)
    : name_(std::move(name)), type_(std::move(platform_type)) {}

Part& Platform::attach(std::unique_ptr<Part> part) {
  const std::string key = part->name();
  auto [it, inserted] = parts_.emplace(key, std::move(part));
  if (!inserted) {
    throw std::invalid_argument("platform '" + name_ + "' already has a part named '" + key + "'");
  }
  return *it->second;
}

const Part* Platform::part(const std::string& name) const {
  auto it = parts_.find(name);
  return it == parts_.end() ? nullptr : it->second.get();
}

Sensor* Platform::sensor(const std::string& name) {
  auto it = parts_.find(name);
  if (it == parts_.end() || !it->second->is_sensor()) return nullptr;
  return static_cast<Sensor*>(it->second.get());
}

const Sensor* Platform::sensor(const std::string& name) const {
  return const_cast<Platform*>(this)->sensor(name);
}

Controller* Platform::controller(const std::string& name) {
  auto it = parts_.find(name);
  if (it == parts_.end() || it->second->is_sensor()) return nullptr;
  return static_cast<Controller*>(it->second.get());
}

std::vector<std::string> Platform::part_names() const {
  std::vector<std::string> out;
  for (const auto& [name, part] : parts_) out.push_back(name);
  return out;
}

void Platform::store_action(const std::string& channel, Quantity value) {
  if (!operable_) return;
  actions_.insert_or_assign(channel, std::move(value));
}

const Quantity* Platform::action(const std::string& channel) const {
  auto it = actions_.find(channel);
  return it == actions_.end() ? nullptr : &it->second;
}

void Platform::refresh_sensors() {
  for (auto& [name, part] : parts_) {
    if (!part->is_sensor()) continue;
    try {
      static_cast<Sensor&>(*part).measure(*this);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoValidMeasurementYet) throw;
    }
  }
}

std::optional<Quantity> Platform::state_value(const std::string& key) const {
  auto s = state();
  auto it = s.find(key);
  if (it == s.end()) return std::nullopt;
  return it->second;
}

bool PartConditions::matches(std::string_view simulator, std::string_view platform) const noexcept {
  if (simulator_type && *simulator_type != simulator) return false;
  if (platform_type && *platform_type != platform) return false;
  return true;
}

void PluginRegistry::register_part(const std::string& group, PartConditions conditions,
                                   PartFactory factory) {
  if (frozen_) {
    throw Error(ErrorCode::RegistryFrozen, "cannot register part group '" + group +
                                               "' after the plugin registry was frozen");
  }
  entries_[group].push_back(Entry{std::move(conditions), std::move(factory)});
}

std::vector<std::string> PluginRegistry::groups() const {
  std::vector<std::string> out;
  for (const auto& [g, e] : entries_) out.push_back(g);
  return out;
}

std::size_t PluginRegistry::entry_count(const std::string& group) const {
  auto it = entries_.find(group);
  return it == entries_.end() ? 0 : it->second.size();
}

const PartFactory& PluginRegistry::resolve_part(const std::string& group,
                                                std::string_view simulator_type,
                                                std::string_view platform_type) const {
  auto it = entries_.find(group);
  if (it == entries_.end()) {
    throw Error(ErrorCode::UnknownGroup, "no part group named '" + group + "'");
  }
  for (const auto& entry : it->second) {
    if (entry.conditions.matches(simulator_type, platform_type)) return entry.factory;
  }
  throw Error(ErrorCode::NoMatch, "part group '" + group + "' has no entry for simulator '" +
                                      std::string(simulator_type) + "' and platform '" +
                                      std::string(platform_type) + "'");
}

}  // namespace envforge
