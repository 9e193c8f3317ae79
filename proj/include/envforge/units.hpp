#pragma once

// Closed, dimension-checked unit library. Every measured value that moves
// between parts, glues, rewards and dones is a Quantity tagged with a Unit.

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace envforge {

enum class Dimension {
  length,
  time,
  velocity,
  angle,
  angular_velocity,
  mass,
  force,
  dimensionless,
  none,
};

std::string_view to_string(Dimension d) noexcept;

class Unit {
 public:
  constexpr std::string_view name() const noexcept { return name_; }
  constexpr Dimension dimension() const noexcept { return dimension_; }
  /// Multiplicative factor to the base unit of this unit's dimension.
  constexpr double scale_to_base() const noexcept { return scale_; }

  friend constexpr bool operator==(const Unit& a, const Unit& b) noexcept {
    return a.name_ == b.name_;
  }

 private:
  constexpr Unit(std::string_view name, Dimension dimension, double scale) noexcept
      : name_(name), dimension_(dimension), scale_(scale) {}

  std::string_view name_;
  Dimension dimension_;
  double scale_;

  friend struct UnitRegistry;
};

namespace units {
Unit meter() noexcept;
Unit centimeter() noexcept;
Unit kilometer() noexcept;
Unit foot() noexcept;
Unit second() noexcept;
Unit meter_per_second() noexcept;
Unit radian() noexcept;
Unit degree() noexcept;
Unit radian_per_second() noexcept;
Unit kilogram() noexcept;
Unit newton() noexcept;
Unit fraction() noexcept;
Unit percent() noexcept;
Unit none() noexcept;
}  // namespace units

/// Every registered unit, in registry order.
std::span<const Unit> all_units() noexcept;

/// Base unit (scale 1) of a dimension.
Unit base_unit(Dimension d) noexcept;

/// Looks up a unit by its config name. "N/A" is accepted as the none unit.
std::optional<Unit> find_unit(std::string_view name) noexcept;

/// As find_unit, but throws Error(UnknownUnit).
Unit parse_unit(std::string_view name);

/// Dimension lookup by name ("length", "velocity", ...).
std::optional<Dimension> find_dimension(std::string_view name) noexcept;

bool check_compatibility(const Unit& a, const Unit& b) noexcept;

/// A non-empty vector of reals with a unit. Entries may be non-finite; raw
/// sensor readings rely on that to signal malformed measurements.
class Quantity {
 public:
  Quantity(double value, Unit unit);
  Quantity(std::vector<double> values, Unit unit);
  Quantity(std::initializer_list<double> values, Unit unit);

  const std::vector<double>& values() const noexcept { return values_; }
  Unit unit() const noexcept { return unit_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_.at(i); }
  /// First element; throws std::logic_error when size() != 1.
  double scalar() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Quantity& a, const Quantity& b) noexcept {
    return a.unit_ == b.unit_ && a.values_ == b.values_;
  }

 private:
  std::vector<double> values_;
  Unit unit_;
};

double convert_value(double value, const Unit& from, const Unit& to);
Quantity convert(const Quantity& q, const Unit& target);

}  // namespace envforge
