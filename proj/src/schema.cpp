#include "envforge/schema.hpp"

#include "envforge/error.hpp"

namespace envforge {

std::string_view to_string(ParamKind kind) noexcept {
  switch (kind) {
    case ParamKind::number: return "number";
    case ParamKind::integer: return "integer";
    case ParamKind::boolean: return "boolean";
    case ParamKind::string: return "string";
    case ParamKind::quantity: return "quantity";
    case ParamKind::number_list: return "list of numbers";
    case ParamKind::string_list: return "list of strings";
    case ParamKind::any: return "any";
  }
  return "any";
}

const ParamSchema* find_param(const Schema& schema, std::string_view name) noexcept {
  for (const auto& p : schema) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

nlohmann::json apply_defaults(const Schema& schema, nlohmann::json config) {
  if (config.is_null()) config = nlohmann::json::object();
  for (const auto& p : schema) {
    if (!config.contains(p.name) && !p.default_value.is_null()) config[p.name] = p.default_value;
  }
  return config;
}

namespace {

std::vector<double> numbers_from(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array() && !j.empty()) {
    std::vector<double> out;
    for (const auto& v : j) {
      if (!v.is_number()) throw Error(ErrorCode::TypeMismatch, "quantity values must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  throw Error(ErrorCode::TypeMismatch, "quantity value must be a number or non-empty list");
}

}  // namespace

Quantity quantity_from_json(const nlohmann::json& j) {
  if (j.is_number() || j.is_array()) return Quantity(numbers_from(j), units::none());
  if (j.is_object()) {
    if (!j.contains("value")) throw Error(ErrorCode::MissingField, "quantity requires 'value'");
    Unit unit = units::none();
    if (j.contains("unit")) {
      if (!j["unit"].is_string()) throw Error(ErrorCode::TypeMismatch, "unit must be a string");
      unit = parse_unit(j["unit"].get<std::string>());
    }
    return Quantity(numbers_from(j["value"]), unit);
  }
  throw Error(ErrorCode::TypeMismatch, "expected a number or {value, unit}");
}

nlohmann::json quantity_to_json(const Quantity& q) {
  nlohmann::json value = q.size() == 1 ? nlohmann::json(q.values().front()) : nlohmann::json(q.values());
  return {{"value", value}, {"unit", std::string(q.unit().name())}};
}

Quantity quantity_param(const nlohmann::json& config, const std::string& name, Unit target) {
  if (!config.contains(name)) throw Error(ErrorCode::MissingField, "missing parameter '" + name + "'");
  return convert(quantity_from_json(config.at(name)), target);
}

double scalar_param(const nlohmann::json& config, const std::string& name, Unit target) {
  return quantity_param(config, name, target).scalar();
}

}  // namespace envforge
