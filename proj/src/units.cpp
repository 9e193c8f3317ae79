#include "envforge/units.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "envforge/error.hpp"

namespace envforge {

struct UnitRegistry {
  static constexpr std::array<Unit, 14> entries{{
      Unit{"meter", Dimension::length, 1.0},
      Unit{"centimeter", Dimension::length, 0.01},
      Unit{"kilometer", Dimension::length, 1000.0},
      Unit{"foot", Dimension::length, 0.3048},
      Unit{"second", Dimension::time, 1.0},
      Unit{"meter_per_second", Dimension::velocity, 1.0},
      Unit{"radian", Dimension::angle, 1.0},
      Unit{"degree", Dimension::angle, std::numbers::pi / 180.0},
      Unit{"radian_per_second", Dimension::angular_velocity, 1.0},
      Unit{"kilogram", Dimension::mass, 1.0},
      Unit{"newton", Dimension::force, 1.0},
      Unit{"fraction", Dimension::dimensionless, 1.0},
      Unit{"percent", Dimension::dimensionless, 0.01},
      Unit{"none", Dimension::none, 1.0},
  }};
};

namespace units {
Unit meter() noexcept { return UnitRegistry::entries[0]; }
Unit centimeter() noexcept { return UnitRegistry::entries[1]; }
Unit kilometer() noexcept { return UnitRegistry::entries[2]; }
Unit foot() noexcept { return UnitRegistry::entries[3]; }
Unit second() noexcept { return UnitRegistry::entries[4]; }
Unit meter_per_second() noexcept { return UnitRegistry::entries[5]; }
Unit radian() noexcept { return UnitRegistry::entries[6]; }
Unit degree() noexcept { return UnitRegistry::entries[7]; }
Unit radian_per_second() noexcept { return UnitRegistry::entries[8]; }
Unit kilogram() noexcept { return UnitRegistry::entries[9]; }
Unit newton() noexcept { return UnitRegistry::entries[10]; }
Unit fraction() noexcept { return UnitRegistry::entries[11]; }
Unit percent() noexcept { return UnitRegistry::entries[12]; }
Unit none() noexcept { return UnitRegistry::entries[13]; }
}  // namespace units

std::string_view to_string(Dimension d) noexcept {
  switch (d) {
    case Dimension::length: return "length";
    case Dimension::time: return "time";
    case Dimension::velocity: return "velocity";
    case Dimension::angle: return "angle";
    case Dimension::angular_velocity: return "angular_velocity";
    case Dimension::mass: return "mass";
    case Dimension::force: return "force";
    case Dimension::dimensionless: return "dimensionless";
    case Dimension::none: return "none";
  }
  return "none";
}

std::span<const Unit> all_units() noexcept { return UnitRegistry::entries; }

Unit base_unit(Dimension d) noexcept {
  for (const auto& u : UnitRegistry::entries) {
    if (u.dimension() == d && u.scale_to_base() == 1.0) return u;
  }
  return units::none();
}

std::optional<Unit> find_unit(std::string_view name) noexcept {
  if (name == "N/A" || name == "n/a") return units::none();
  for (const auto& u : UnitRegistry::entries) {
    if (u.name() == name) return u;
  }
  return std::nullopt;
}

Unit parse_unit(std::string_view name) {
  if (auto u = find_unit(name)) return *u;
  throw Error(ErrorCode::UnknownUnit, "unknown unit '" + std::string(name) + "'");
}

std::optional<Dimension> find_dimension(std::string_view name) noexcept {
  for (auto d : {Dimension::length, Dimension::time, Dimension::velocity, Dimension::angle,
                 Dimension::angular_velocity, Dimension::mass, Dimension::force,
                 Dimension::dimensionless, Dimension::none}) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

bool check_compatibility(const Unit& a, const Unit& b) noexcept {
  return a.dimension() == b.dimension();
}

Quantity::Quantity(double value, Unit unit) : values_{value}, unit_(unit) {}

Quantity::Quantity(std::vector<double> values, Unit unit)
    : values_(std::move(values)), unit_(unit) {
  if (values_.empty()) throw std::invalid_argument("Quantity requires at least one value");
}

Quantity::Quantity(std::initializer_list<double> values, Unit unit)
    : Quantity(std::vector<double>(values), unit) {}

double Quantity::scalar() const {
  if (values_.size() != 1) {
    throw std::logic_error("Quantity::scalar on a quantity of size " +
                           std::to_string(values_.size()));
  }
  return values_.front();
}

bool Quantity::all_finite() const noexcept {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

[[noreturn]] void throw_mismatch(const Unit& from, const Unit& to) {
  throw Error(ErrorCode::DimensionMismatch,
              "cannot convert " + std::string(from.name()) + " (" +
                  std::string(to_string(from.dimension())) + ") to " + std::string(to.name()) +
                  " (" + std::string(to_string(to.dimension())) + ")");
}

}  // namespace

double convert_value(double value, const Unit& from, const Unit& to) {
  if (!check_compatibility(from, to)) throw_mismatch(from, to);
  if (from == to) return value;
  return value * from.scale_to_base() / to.scale_to_base();
}

Quantity convert(const Quantity& q, const Unit& target) {
  if (!check_compatibility(q.unit(), target)) throw_mismatch(q.unit(), target);
  if (q.unit() == target) return q;
  std::vector<double> out(q.values());
  for (double& v : out) v = v * q.unit().scale_to_base() / target.scale_to_base();
  return Quantity(std::move(out), target);
}

}  // namespace envforge
