#pragma once

// Declarative parameter schemas shared by every configurable class
// (functors, simulators, parts, policies, metrics). The validator checks a
// config mapping against a schema; constructors read the defaulted mapping.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "envforge/units.hpp"
#include "json.hpp"

namespace envforge {

enum class ParamKind {
  number,
  integer,
  boolean,
  string,
  quantity,     // bare number (unit none) or {value, unit}
  number_list,
  string_list,
  any,
};

std::string_view to_string(ParamKind kind) noexcept;

struct ParamSchema {
  std::string name;
  ParamKind kind = ParamKind::number;
  bool required = false;
  nlohmann::json default_value;          // null = no default
  std::optional<Dimension> dimension;    // quantity params only
  std::optional<double> minimum;         // numeric params only
  bool exclusive_minimum = false;
};

using Schema = std::vector<ParamSchema>;

const ParamSchema* find_param(const Schema& schema, std::string_view name) noexcept;

/// Returns `config` with every absent defaulted parameter filled in.
nlohmann::json apply_defaults(const Schema& schema, nlohmann::json config);

/// Reads a quantity written as a bare number (unit none), a list of numbers,
/// or {value: <number|list>, unit: <name>}. Throws Error(TypeMismatch) or
/// Error(UnknownUnit).
Quantity quantity_from_json(const nlohmann::json& j);
nlohmann::json quantity_to_json(const Quantity& q);

/// Reads a quantity parameter and converts it to `target`.
Quantity quantity_param(const nlohmann::json& config, const std::string& name, Unit target);
double scalar_param(const nlohmann::json& config, const std::string& name, Unit target);

}  // namespace envforge
