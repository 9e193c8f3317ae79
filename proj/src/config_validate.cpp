#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "envforge/config.hpp"

namespace envforge {
namespace fs = std::filesystem;
using nlohmann::json;

const Registries& default_registries() {
  static const Registries r = [] {
    Registries reg;
    register_builtin_functors(reg.functors);
    register_builtin_parts(reg.parts);
    reg.simulators = builtin_simulators();
    register_builtin_policies(reg.policies);
    reg.functors.freeze();
    reg.parts.freeze();
    return reg;
  }();
  return r;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& e : errors) {
    os << (e.path.empty() ? "<root>" : e.path) << ": " << envforge::to_string(e.code) << ": " << e.message;
    if (e.location) os << " (" << e.location->file << ":" << e.location->line << ":" << e.location->column << ")";
    os << "\n";
  }
  os << errors.size() << (errors.size() == 1 ? " error" : " errors") << "\n";
  return os.str();
}

ConfigKind detect_kind(const json& tree) noexcept {
  if (!tree.is_object()) return ConfigKind::unknown;
  if (tree.contains("agent")) return ConfigKind::agent;
  if (tree.contains("simulator")) return ConfigKind::environment;
  return ConfigKind::unknown;
}

namespace {

std::string join(const std::string& base, const std::string& key) {
  if (base.empty()) return key;
  if (key.empty()) return base;
  return base + "/" + key;
}

const char* type_name(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "boolean";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "integer";
    case json::value_t::number_float: return "number";
    case json::value_t::string: return "string";
    case json::value_t::array: return "list";
    case json::value_t::object: return "mapping";
    default: return "value";
  }
}

class Reporter {
 public:
  Reporter(ValidationReport& report, const LoadedConfig& loaded, std::string loc_prefix = {},
           std::string report_prefix = {})
      : report_(&report), loaded_(&loaded), loc_(std::move(loc_prefix)), rep_(std::move(report_prefix)) {}

  void operator()(const std::string& rel, ErrorCode code, std::string message) const {
    report_->errors.push_back(ValidationIssue{path(rel), code, std::move(message), loaded_->locate(join(loc_, rel))});
  }
  std::string path(const std::string& rel) const { return join(rep_, rel); }
  Reporter sub(const std::string& rel) const { return Reporter(*report_, *loaded_, join(loc_, rel), join(rep_, rel)); }
  std::size_t count() const { return report_->errors.size(); }

 private:
  ValidationReport* report_;
  const LoadedConfig* loaded_;
  std::string loc_;
  std::string rep_;
};

bool expect(const json& j, json::value_t type, const Reporter& rep, const std::string& rel, const char* what) {
  const bool ok = type == json::value_t::number_float ? j.is_number() : j.type() == type;
  if (!ok) rep(rel, ErrorCode::TypeMismatch, std::string("expected ") + what + ", got " + type_name(j));
  return ok;
}

void unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const Reporter& rep,
                  const std::string& rel) {
  for (const auto& [k, v] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
      rep(join(rel, k), ErrorCode::UnknownField, "unknown key '" + k + "'");
    }
  }
}

std::optional<Quantity> check_quantity(const json& v, const Reporter& rep, const std::string& rel,
                                       std::optional<Dimension> dim) {
  Quantity q(0.0, units::none());
  try {
    q = quantity_from_json(v);
  } catch (const Error& e) {
    std::string at = rel;
    if (e.code() == ErrorCode::UnknownUnit) at = join(rel, "unit");
    if (e.code() == ErrorCode::MissingField) at = join(rel, "value");
    if (e.code() == ErrorCode::TypeMismatch && v.is_object() && v.contains("unit") && !v["unit"].is_string()) {
      at = join(rel, "unit");
    } else if (e.code() == ErrorCode::TypeMismatch && v.is_object() && v.contains("value")) {
      at = join(rel, "value");
    }
    rep(at, e.code(), e.detail());
    return std::nullopt;
  }
  if (v.is_object()) {
    for (const auto& [k, x] : v.items()) {
      if (k != "value" && k != "unit") rep(join(rel, k), ErrorCode::UnknownField, "unknown quantity key '" + k + "'");
    }
  }
  if (dim && q.unit().dimension() != *dim) {
    rep(v.is_object() && v.contains("unit") ? join(rel, "unit") : rel, ErrorCode::DimensionMismatch,
        "expected a " + std::string(to_string(*dim)) + " quantity, got unit " + std::string(q.unit().name()) +
            " (" + std::string(to_string(q.unit().dimension())) + ")");
    return std::nullopt;
  }
  return q;
}

bool check_param(const ParamSchema& p, const json& v, const Reporter& rep, const std::string& rel) {
  auto minimum = [&](double x) {
    if (p.minimum && (p.exclusive_minimum ? !(x > *p.minimum) : !(x >= *p.minimum))) {
      std::ostringstream os;
      os << "'" << p.name << "' must be " << (p.exclusive_minimum ? "> " : ">= ") << *p.minimum << ", got " << x;
      rep(rel, ErrorCode::InvalidValue, os.str());
      return false;
    }
    return true;
  };
  switch (p.kind) {
    case ParamKind::number:
      return expect(v, json::value_t::number_float, rep, rel, "a number") && minimum(v.get<double>());
    case ParamKind::integer:
      if (!v.is_number_integer()) {
        rep(rel, ErrorCode::TypeMismatch, std::string("expected an integer, got ") + type_name(v));
        return false;
      }
      return minimum(v.get<double>());
    case ParamKind::boolean:
      return expect(v, json::value_t::boolean, rep, rel, "a boolean");
    case ParamKind::string:
      return expect(v, json::value_t::string, rep, rel, "a string");
    case ParamKind::quantity:
      return check_quantity(v, rep, rel, p.dimension).has_value();
    case ParamKind::number_list:
    case ParamKind::string_list: {
      if (!expect(v, json::value_t::array, rep, rel, "a list")) return false;
      bool ok = true;
      for (std::size_t i = 0; i < v.size(); ++i) {
        const bool good = p.kind == ParamKind::number_list ? v[i].is_number() : v[i].is_string();
        if (!good) {
          rep(join(rel, std::to_string(i)), ErrorCode::TypeMismatch,
              std::string("expected ") + (p.kind == ParamKind::number_list ? "a number" : "a string") + ", got " +
                  type_name(v[i]));
          ok = false;
        }
      }
      return ok;
    }
    case ParamKind::any:
      return true;
  }
  return true;
}

/// Checks a hyperparameter mapping against its schema. `supplied` names
/// parameters provided some other way (references).
void check_config(const Schema& schema, const json& config, const Reporter& rep, const std::string& rel,
                  const std::set<std::string>& supplied = {}) {
  if (!config.is_null() && !config.is_object()) {
    rep(rel, ErrorCode::TypeMismatch, std::string("expected a mapping, got ") + type_name(config));
    return;
  }
  if (config.is_object()) {
    for (const auto& [k, v] : config.items()) {
      const ParamSchema* p = find_param(schema, k);
      if (!p) {
        rep(join(rel, k), ErrorCode::UnknownField, "unknown parameter '" + k + "'");
        continue;
      }
      if (supplied.count(k)) {
        rep(join(rel, k), ErrorCode::InvalidValue, "'" + k + "' is given both inline and as a reference");
        continue;
      }
      check_param(*p, v, rep, join(rel, k));
    }
  }
  for (const auto& p : schema) {
    const bool present = config.is_object() && config.contains(p.name);
    if (p.required && !present && !supplied.count(p.name)) {
      rep(join(rel, p.name), ErrorCode::MissingField, "missing required parameter '" + p.name + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Parameter specs

std::optional<double> number_at(const json& obj, const char* key, const Reporter& rep, const std::string& rel,
                                bool required) {
  if (!obj.contains(key)) {
    if (required) rep(join(rel, key), ErrorCode::MissingField, std::string("missing '") + key + "'");
    return std::nullopt;
  }
  if (!obj[key].is_number()) {
    rep(join(rel, key), ErrorCode::TypeMismatch, std::string("expected a number, got ") + type_name(obj[key]));
    return std::nullopt;
  }
  return obj[key].get<double>();
}

std::optional<Distribution> parse_distribution(const json& d, const Reporter& rep, const std::string& rel) {
  if (!expect(d, json::value_t::object, rep, rel, "a distribution mapping")) return std::nullopt;
  if (!d.contains("kind")) {
    rep(join(rel, "kind"), ErrorCode::MissingField, "distribution requires 'kind'");
    return std::nullopt;
  }
  if (!expect(d["kind"], json::value_t::string, rep, join(rel, "kind"), "a string")) return std::nullopt;
  const std::string kind = d["kind"].get<std::string>();
  const std::size_t before = rep.count();
  std::optional<Distribution> out;
  if (kind == "constant") {
    unknown_keys(d, {"kind", "value"}, rep, rel);
    auto v = number_at(d, "value", rep, rel, true);
    if (v) out = Constant{*v};
  } else if (kind == "uniform") {
    unknown_keys(d, {"kind", "low", "high"}, rep, rel);
    auto lo = number_at(d, "low", rep, rel, true);
    auto hi = number_at(d, "high", rep, rel, true);
    if (lo && hi) out = Uniform{*lo, *hi};
  } else if (kind == "truncated_gaussian") {
    unknown_keys(d, {"kind", "mu", "sigma", "low", "high"}, rep, rel);
    auto mu = number_at(d, "mu", rep, rel, true);
    auto sigma = number_at(d, "sigma", rep, rel, true);
    auto lo = number_at(d, "low", rep, rel, true);
    auto hi = number_at(d, "high", rep, rel, true);
    if (mu && sigma && lo && hi) out = TruncatedGaussian{*mu, *sigma, *lo, *hi};
  } else if (kind == "discrete_choice") {
    unknown_keys(d, {"kind", "values", "weights"}, rep, rel);
    DiscreteChoice c;
    ParamSchema list;
    list.kind = ParamKind::number_list;
    if (!d.contains("values")) {
      rep(join(rel, "values"), ErrorCode::MissingField, "missing 'values'");
    } else if (check_param(list, d["values"], rep, join(rel, "values"))) {
      c.values = d["values"].get<std::vector<double>>();
    }
    if (d.contains("weights") && check_param(list, d["weights"], rep, join(rel, "weights"))) {
      c.weights = d["weights"].get<std::vector<double>>();
    }
    out = c;
  } else {
    rep(join(rel, "kind"), ErrorCode::InvalidValue,
        "unknown distribution kind '" + kind + "' (constant, uniform, truncated_gaussian, discrete_choice)");
    return std::nullopt;
  }
  if (rep.count() != before || !out) return std::nullopt;
  try {
    check_distribution(*out);
  } catch (const Error& e) {
    rep(rel, e.code(), e.detail());
    return std::nullopt;
  }
  return out;
}

std::optional<ParameterSpec> parse_parameter(const std::string& name, const json& j, const Reporter& rep,
                                             const std::string& rel,
                                             std::optional<Dimension> dim = std::nullopt) {
  const std::size_t before = rep.count();
  // Shorthand: a bare quantity is a constant.
  if (j.is_number() || (j.is_object() && j.contains("value") && !j.contains("distribution"))) {
    auto q = check_quantity(j, rep, rel, dim);
    if (!q) return std::nullopt;
    if (q->size() != 1) {
      rep(rel, ErrorCode::TypeMismatch, "parameters are scalar");
      return std::nullopt;
    }
    return ParameterSpec(name, Constant{q->scalar()}, q->unit());
  }
  if (!expect(j, json::value_t::object, rep, rel, "a parameter mapping or quantity")) return std::nullopt;
  unknown_keys(j, {"name", "distribution", "unit", "updaters"}, rep, rel);
  if (j.contains("name") && (!j["name"].is_string() || j["name"].get<std::string>() != name.substr(name.rfind('/') + 1))) {
    rep(join(rel, "name"), ErrorCode::InvalidValue, "parameter name does not match its key");
  }
  Unit unit = units::none();
  if (j.contains("unit")) {
    if (expect(j["unit"], json::value_t::string, rep, join(rel, "unit"), "a unit name")) {
      if (auto u = find_unit(j["unit"].get<std::string>())) {
        unit = *u;
        if (dim && unit.dimension() != *dim) {
          rep(join(rel, "unit"), ErrorCode::DimensionMismatch,
              "expected a " + std::string(to_string(*dim)) + " unit, got " + std::string(unit.name()));
        }
      } else {
        rep(join(rel, "unit"), ErrorCode::UnknownUnit, "unknown unit '" + j["unit"].get<std::string>() + "'");
      }
    }
  } else if (dim && *dim != Dimension::none) {
    rep(join(rel, "unit"), ErrorCode::DimensionMismatch,
        "expected a " + std::string(to_string(*dim)) + " unit, got none");
  }
  std::optional<Distribution> dist;
  if (!j.contains("distribution")) {
    rep(join(rel, "distribution"), ErrorCode::MissingField, "parameter requires 'distribution'");
  } else {
    dist = parse_distribution(j["distribution"], rep, join(rel, "distribution"));
  }
  std::vector<IncrementUpdater> updaters;
  if (j.contains("updaters") && expect(j["updaters"], json::value_t::array, rep, join(rel, "updaters"), "a list")) {
    std::set<std::string> targets;
    for (std::size_t i = 0; i < j["updaters"].size(); ++i) {
      const json& u = j["updaters"][i];
      const std::string up = join(join(rel, "updaters"), std::to_string(i));
      if (!expect(u, json::value_t::object, rep, up, "an updater mapping")) continue;
      unknown_keys(u, {"target", "kind", "step", "limit"}, rep, up);
      if (u.contains("kind") && u["kind"] != "increment") {
        rep(join(up, "kind"), ErrorCode::InvalidValue, "unknown updater kind (only 'increment')");
      }
      IncrementUpdater inc;
      if (!u.contains("target")) {
        rep(join(up, "target"), ErrorCode::MissingField, "updater requires 'target'");
      } else if (expect(u["target"], json::value_t::string, rep, join(up, "target"), "a string")) {
        inc.target = u["target"].get<std::string>();
        if (dist && !hyperparameter(*dist, inc.target)) {
          rep(join(up, "target"), ErrorCode::UnknownHyperparameter,
              "distribution " + std::string(distribution_kind(*dist)) + " has no hyperparameter '" + inc.target + "'");
        } else if (!targets.insert(inc.target).second) {
          rep(join(up, "target"), ErrorCode::InvalidValue, "second updater for '" + inc.target + "'");
        }
      }
      if (auto s = number_at(u, "step", rep, up, true)) inc.step = *s;
      inc.limit = number_at(u, "limit", rep, up, false);
      updaters.push_back(inc);
    }
  }
  if (rep.count() != before || !dist) return std::nullopt;
  try {
    return ParameterSpec(name, *dist, unit, updaters);
  } catch (const Error& e) {
    rep(rel, e.code(), e.detail());
  }
  return std::nullopt;
}

std::vector<ParameterSpec> parse_parameter_map(const json& j, const std::string& prefix, const Reporter& rep,
                                               const std::string& rel) {
  std::vector<ParameterSpec> out;
  if (j.is_null()) return out;
  if (!expect(j, json::value_t::object, rep, rel, "a mapping of parameters")) return out;
  for (const auto& [k, v] : j.items()) {
    if (auto p = parse_parameter(prefix + k, v, rep, join(rel, k))) out.push_back(std::move(*p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Functor specs

std::optional<FunctorSpec> parse_functor(const json& j, const Reporter& rep, const std::string& rel, FunctorKind kind,
                                         const Registries& regs);

std::optional<WrappedChild> parse_child(const std::string& role, const json& j, const Reporter& rep,
                                        const std::string& rel, const Registries& regs) {
  if (j.is_string()) return WrappedChild{role, j.get<std::string>(), nullptr};
  auto spec = parse_functor(j, rep, rel, FunctorKind::glue, regs);
  if (!spec) return std::nullopt;
  return WrappedChild{role, {}, std::make_shared<const FunctorSpec>(std::move(*spec))};
}

std::optional<FunctorSpec> parse_functor(const json& j, const Reporter& rep, const std::string& rel, FunctorKind kind,
                                         const Registries& regs) {
  if (!expect(j, json::value_t::object, rep, rel, "a functor mapping")) return std::nullopt;
  const std::size_t before = rep.count();
  unknown_keys(j, {"functor", "name", "config", "references", "wrapped", "extractor"}, rep, rel);
  FunctorSpec spec;
  spec.path = rep.path(rel);
  const FunctorEntry* entry = nullptr;
  if (!j.contains("functor")) {
    rep(join(rel, "functor"), ErrorCode::MissingField, "functor spec requires 'functor'");
  } else if (expect(j["functor"], json::value_t::string, rep, join(rel, "functor"), "a functor name")) {
    spec.functor = j["functor"].get<std::string>();
    entry = regs.functors.find(spec.functor);
    if (!entry) {
      rep(join(rel, "functor"), ErrorCode::UnknownFunctor, "no functor named '" + spec.functor + "'");
    } else if (!(entry->kind == kind || (kind == FunctorKind::shared_done && entry->kind == FunctorKind::done))) {
      rep(join(rel, "functor"), ErrorCode::TypeMismatch,
          "'" + spec.functor + "' is a " + std::string(to_string(entry->kind)) + ", expected a " +
              std::string(to_string(kind == FunctorKind::shared_done ? FunctorKind::done : kind)));
      entry = nullptr;
    }
  }
  if (j.contains("name") && expect(j["name"], json::value_t::string, rep, join(rel, "name"), "a string")) {
    spec.name = j["name"].get<std::string>();
  }
  if (j.contains("references") && !j["references"].is_null() &&
      expect(j["references"], json::value_t::object, rep, join(rel, "references"), "a mapping")) {
    for (const auto& [param, key] : j["references"].items()) {
      const std::string at = join(join(rel, "references"), param);
      if (!expect(key, json::value_t::string, rep, at, "a reference key")) continue;
      if (entry) {
        const ParamSchema* p = find_param(entry->schema, param);
        if (!p || p->kind != ParamKind::quantity) {
          rep(at, ErrorCode::UnknownField, "'" + spec.functor + "' has no referenceable parameter '" + param + "'");
          continue;
        }
      }
      spec.references.emplace(param, key.get<std::string>());
    }
  }
  if (j.contains("config")) {
    if (entry) {
      std::set<std::string> supplied;
      for (const auto& [k, v] : spec.references) supplied.insert(k);
      check_config(entry->schema, j["config"], rep, join(rel, "config"), supplied);
    }
    if (j["config"].is_object()) spec.config = j["config"];
  } else if (entry) {
    std::set<std::string> supplied;
    for (const auto& [k, v] : spec.references) supplied.insert(k);
    check_config(entry->schema, json::object(), rep, join(rel, "config"), supplied);
  }
  if (j.contains("wrapped") && !j["wrapped"].is_null()) {
    const json& w = j["wrapped"];
    const std::string wr = join(rel, "wrapped");
    if (w.is_string() || (w.is_object() && w.contains("functor"))) {
      spec.shape = WrapShape::single;
      if (auto c = parse_child("", w, rep, wr, regs)) spec.wrapped.push_back(std::move(*c));
    } else if (w.is_array()) {
      spec.shape = WrapShape::list;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const std::string role = std::to_string(i);
        if (auto c = parse_child(role, w[i], rep, join(wr, role), regs)) spec.wrapped.push_back(std::move(*c));
      }
    } else if (w.is_object()) {
      spec.shape = WrapShape::map;
      for (const auto& [role, child] : w.items()) {
        if (auto c = parse_child(role, child, rep, join(wr, role), regs)) spec.wrapped.push_back(std::move(*c));
      }
    } else {
      rep(wr, ErrorCode::TypeMismatch, std::string("expected a glue, list or mapping, got ") + type_name(w));
    }
    if (entry && rep.count() == before &&
        (spec.wrapped.size() < entry->min_children || spec.wrapped.size() > entry->max_children)) {
      rep(wr, ErrorCode::InvalidValue,
          "'" + spec.functor + "' takes " + std::to_string(entry->min_children) +
              (entry->max_children == SIZE_MAX ? std::string(" or more") : ".." + std::to_string(entry->max_children)) +
              " wrapped glues, got " + std::to_string(spec.wrapped.size()));
    }
  } else if (entry && entry->min_children > 0) {
    rep(join(rel, "wrapped"), ErrorCode::MissingField, "'" + spec.functor + "' requires a wrapped glue");
  }
  if (j.contains("extractor") && !j["extractor"].is_null()) {
    const json& e = j["extractor"];
    const std::string er = join(rel, "extractor");
    if (expect(e, json::value_t::object, rep, er, "an extractor mapping")) {
      unknown_keys(e, {"key", "index"}, rep, er);
      ExtractorSpec ex;
      if (e.contains("key") && expect(e["key"], json::value_t::string, rep, join(er, "key"), "a string")) {
        ex.key = e["key"].get<std::string>();
      }
      if (e.contains("index")) {
        if (!e["index"].is_number_integer() || e["index"].get<long long>() < 0) {
          rep(join(er, "index"), ErrorCode::TypeMismatch, "extractor index must be a non-negative integer");
        } else {
          ex.index = e["index"].get<std::size_t>();
        }
      }
      spec.extractor = ex;
    }
  }
  if (rep.count() != before) return std::nullopt;
  return spec;
}

template <class F>
void walk_specs(const FunctorSpec& spec, F&& f) {
  f(spec);
  for (const auto& c : spec.wrapped) {
    if (c.spec) walk_specs(*c.spec, f);
  }
}

std::string wrapped_path(const FunctorSpec& spec, const WrappedChild& c) {
  return spec.shape == WrapShape::single ? join(spec.path, "wrapped") : join(join(spec.path, "wrapped"), c.role);
}

std::vector<FunctorSpec> parse_functor_list(const json& tree, const char* key, FunctorKind kind, const Reporter& rep,
                                            const Registries& regs, bool required) {
  std::vector<FunctorSpec> out;
  if (!tree.contains(key) || tree[key].is_null()) {
    if (required) rep(key, ErrorCode::MissingField, std::string("requires at least one entry in '") + key + "'");
    return out;
  }
  if (!expect(tree[key], json::value_t::array, rep, key, "a list")) return out;
  if (required && tree[key].empty()) {
    rep(key, ErrorCode::MissingField, std::string("requires at least one entry in '") + key + "'");
  }
  for (std::size_t i = 0; i < tree[key].size(); ++i) {
    if (auto s = parse_functor(tree[key][i], rep, join(key, std::to_string(i)), kind, regs)) out.push_back(std::move(*s));
  }
  return out;
}

/// Path of `full` relative to the reporter's own prefix.
std::string relative(const Reporter& rep, const std::string& full) {
  const std::string base = rep.path("");
  if (base.empty()) return full;
  if (full == base) return {};
  if (full.rfind(base + "/", 0) == 0) return full.substr(base.size() + 1);
  return full;
}

std::optional<AgentConfig> parse_agent(const json& tree, const Reporter& rep, const Registries& regs) {
  if (!expect(tree, json::value_t::object, rep, "", "an agent mapping")) return std::nullopt;
  const std::size_t before = rep.count();
  AgentConfig a;
  a.tree = tree;
  unknown_keys(tree, {"agent", "trainable", "platforms", "parts", "episode_parameter_provider", "glues", "dones",
                      "rewards", "reference_store", "policy"},
               rep, "");
  if (!tree.contains("agent")) {
    rep("agent", ErrorCode::MissingField, "agent file requires 'agent'");
  } else if (expect(tree["agent"], json::value_t::string, rep, "agent", "an agent name")) {
    a.name = tree["agent"].get<std::string>();
    if (a.name.empty() || a.name.find('/') != std::string::npos) {
      rep("agent", ErrorCode::InvalidValue, "agent names are non-empty and contain no '/'");
    }
  }
  if (tree.contains("trainable") && expect(tree["trainable"], json::value_t::boolean, rep, "trainable", "a boolean")) {
    a.trainable = tree["trainable"].get<bool>();
  }
  if (!tree.contains("platforms")) {
    rep("platforms", ErrorCode::MissingField, "agent requires 'platforms'");
  } else if (tree["platforms"].is_string()) {
    a.platforms.push_back(tree["platforms"].get<std::string>());
  } else if (expect(tree["platforms"], json::value_t::array, rep, "platforms", "a list of platform names")) {
    for (std::size_t i = 0; i < tree["platforms"].size(); ++i) {
      if (expect(tree["platforms"][i], json::value_t::string, rep, join("platforms", std::to_string(i)), "a name")) {
        a.platforms.push_back(tree["platforms"][i].get<std::string>());
      }
    }
    if (tree["platforms"].empty()) rep("platforms", ErrorCode::MissingField, "agent requires at least one platform");
  }
  const std::string default_platform = a.platforms.empty() ? std::string() : a.platforms.front();

  if (tree.contains("parts") && !tree["parts"].is_null() &&
      expect(tree["parts"], json::value_t::array, rep, "parts", "a list of parts")) {
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < tree["parts"].size(); ++i) {
      const json& p = tree["parts"][i];
      const std::string pr = join("parts", std::to_string(i));
      if (!expect(p, json::value_t::object, rep, pr, "a part mapping")) continue;
      unknown_keys(p, {"part", "name", "platform", "config"}, rep, pr);
      PartConfig part;
      part.path = rep.path(pr);
      if (!p.contains("part")) {
        rep(join(pr, "part"), ErrorCode::MissingField, "part requires 'part'");
        continue;
      }
      if (!expect(p["part"], json::value_t::string, rep, join(pr, "part"), "a part group name")) continue;
      part.group = p["part"].get<std::string>();
      if (!regs.parts.has_group(part.group)) {
        rep(join(pr, "part"), ErrorCode::UnknownPartGroup, "no part group '" + part.group + "' in the plugin library");
      }
      part.name = part.group;
      if (p.contains("name") && expect(p["name"], json::value_t::string, rep, join(pr, "name"), "a string")) {
        part.name = p["name"].get<std::string>();
      }
      part.platform = default_platform;
      if (p.contains("platform") && expect(p["platform"], json::value_t::string, rep, join(pr, "platform"), "a name")) {
        part.platform = p["platform"].get<std::string>();
        if (std::find(a.platforms.begin(), a.platforms.end(), part.platform) == a.platforms.end()) {
          rep(join(pr, "platform"), ErrorCode::UnknownReference,
              "platform '" + part.platform + "' is not controlled by this agent");
        }
      }
      if (p.contains("config") && !p["config"].is_null() &&
          expect(p["config"], json::value_t::object, rep, join(pr, "config"), "a mapping")) {
        part.config = p["config"];
      }
      if (!seen.emplace(part.platform, part.name).second) {
        rep(join(pr, "name"), ErrorCode::InvalidValue, "second part named '" + part.name + "' on '" + part.platform + "'");
      }
      a.parts.push_back(std::move(part));
    }
  }

  const std::string prefix = a.name + "/";
  if (tree.contains("episode_parameter_provider")) {
    json epp = tree["episode_parameter_provider"];
    a.parameters = parse_parameter_map(epp, prefix, rep, "episode_parameter_provider");
  }
  if (tree.contains("reference_store")) {
    auto store = parse_parameter_map(tree["reference_store"], prefix, rep, "reference_store");
    for (auto& p : store) {
      const bool dup = std::any_of(a.parameters.begin(), a.parameters.end(),
                                   [&](const ParameterSpec& q) { return q.name() == p.name(); });
      if (dup) {
        rep(join("reference_store", p.name().substr(prefix.size())), ErrorCode::InvalidValue,
            "'" + p.name().substr(prefix.size()) + "' is declared twice");
        continue;
      }
      a.reference_keys.push_back(p.name());
      a.parameters.push_back(std::move(p));
    }
  }

  a.glues = parse_functor_list(tree, "glues", FunctorKind::glue, rep, regs, true);
  a.dones = parse_functor_list(tree, "dones", FunctorKind::done, rep, regs, false);
  a.rewards = parse_functor_list(tree, "rewards", FunctorKind::reward, rep, regs, false);

  if (tree.contains("policy") && !tree["policy"].is_null()) {
    const json& p = tree["policy"];
    if (p.is_string()) {
      a.policy.name = p.get<std::string>();
      if (!regs.policies.find(a.policy.name)) rep("policy", ErrorCode::InvalidValue, "unknown policy '" + a.policy.name + "'");
    } else if (expect(p, json::value_t::object, rep, "policy", "a policy mapping")) {
      unknown_keys(p, {"name", "handle", "config"}, rep, "policy");
      if (p.contains("name") && expect(p["name"], json::value_t::string, rep, "policy/name", "a policy name")) {
        a.policy.name = p["name"].get<std::string>();
      }
      const PolicyEntry* entry = regs.policies.find(a.policy.name);
      if (!entry) rep("policy/name", ErrorCode::InvalidValue, "unknown policy '" + a.policy.name + "'");
      if (p.contains("handle") && expect(p["handle"], json::value_t::string, rep, "policy/handle", "a string")) {
        a.policy.handle = p["handle"].get<std::string>();
      }
      if (p.contains("config") && !p["config"].is_null()) {
        if (entry) check_config(entry->schema, p["config"], rep, "policy/config");
        if (p["config"].is_object()) a.policy.config = p["config"];
      } else if (entry) {
        check_config(entry->schema, json::object(), rep, "policy/config");
      }
    }
  }
  if (a.policy.handle.empty()) a.policy.handle = a.name;

  // Glue names, sibling references and part bindings.
  std::set<std::string> glue_names;
  for (const auto& g : a.glues) glue_names.insert(default_functor_name(g));
  auto check_refs = [&](const FunctorSpec& root) {
    walk_specs(root, [&](const FunctorSpec& s) {
      for (const auto& c : s.wrapped) {
        if (!c.ref.empty() && !glue_names.count(c.ref)) {
          rep(relative(rep, wrapped_path(s, c)), ErrorCode::UnknownExtractorTarget,
              "no glue named '" + c.ref + "' in this agent");
        }
      }
      const FunctorEntry* e = regs.functors.find(s.functor);
      if (!e || !e->uses_platform) return;
      const std::string platform = s.config.value("platform", default_platform);
      if (s.config.contains("platform") &&
          std::find(a.platforms.begin(), a.platforms.end(), platform) == a.platforms.end()) {
        rep(relative(rep, join(s.path, "config/platform")), ErrorCode::UnknownReference,
            "platform '" + platform + "' is not controlled by this agent");
      }
      for (const char* key : {"sensor", "controller"}) {
        if (!s.config.contains(key) || !s.config[key].is_string()) continue;
        const std::string part = s.config[key].get<std::string>();
        const bool found = std::any_of(a.parts.begin(), a.parts.end(), [&](const PartConfig& p) {
          return p.name == part && p.platform == platform;
        });
        if (!found) {
          rep(relative(rep, join(s.path, std::string("config/") + key)), ErrorCode::PartBindingError,
              "no part '" + part + "' on platform '" + platform + "'");
        }
      }
    });
  };
  for (const auto& s : a.glues) check_refs(s);
  for (const auto& s : a.dones) check_refs(s);
  for (const auto& s : a.rewards) check_refs(s);

  if (rep.count() != before) return std::nullopt;
  return a;
}

std::optional<SpaceCheckMode> parse_space_check(const json& j, const Reporter& rep) {
  SpaceCheckMode m;
  const std::string at = "space_check_mode";
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "every_step") return m;
    if (s == "off") {
      m.kind = SpaceCheckMode::Kind::off;
      return m;
    }
    if (s == "spot_check") {
      m.kind = SpaceCheckMode::Kind::spot_check;
      return m;
    }
    rep(at, ErrorCode::InvalidValue, "space_check_mode is every_step, off, or {spot_check: p}");
    return std::nullopt;
  }
  if (j.is_object() && j.size() == 1 && j.contains("spot_check")) {
    m.kind = SpaceCheckMode::Kind::spot_check;
    const json& p = j["spot_check"];
    if (p.is_null()) return m;
    if (!p.is_number() || p.get<double>() < 0.0 || p.get<double>() > 1.0) {
      rep(join(at, "spot_check"), ErrorCode::InvalidValue, "spot-check probability must lie in [0, 1]");
      return std::nullopt;
    }
    m.probability = p.get<double>();
    return m;
  }
  rep(at, ErrorCode::InvalidValue, "space_check_mode is every_step, off, or {spot_check: p}");
  return std::nullopt;
}

void check_reference_dimensions(const FunctorSpec& root, const std::map<std::string, Unit>& units_by_key,
                                const Registries& regs, const Reporter& rep) {
  walk_specs(root, [&](const FunctorSpec& s) {
    const FunctorEntry* e = regs.functors.find(s.functor);
    if (!e) return;
    for (const auto& [param, key] : s.references) {
      const ParamSchema* p = find_param(e->schema, param);
      auto it = units_by_key.find(key);
      if (!p || !p->dimension || it == units_by_key.end()) continue;
      if (it->second.dimension() != *p->dimension) {
        rep(relative(rep, join(join(s.path, "references"), param)), ErrorCode::DimensionMismatch,
            "'" + param + "' expects a " + std::string(to_string(*p->dimension)) + " value, reference '" + key +
                "' is " + std::string(to_string(it->second.dimension())) + " (" + std::string(it->second.name()) + ")");
      }
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------

EpisodeParameterProvider EnvironmentConfig::make_provider() const {
  EpisodeParameterProvider epp;
  for (const auto& p : platforms) {
    for (const auto& s : p.init) epp.add(s);
  }
  for (const auto& s : reference_store) epp.add(s);
  for (const auto& a : agents) {
    for (const auto& s : a.parameters) epp.add(s);
  }
  return epp;
}

std::map<std::string, Unit> EnvironmentConfig::reference_units() const {
  std::map<std::string, Unit> out;
  for (const auto& p : platforms) {
    for (const auto& s : p.init) out.emplace(s.name(), s.unit());
  }
  for (const auto& s : reference_store) out.emplace(s.name(), s.unit());
  for (const auto& a : agents) {
    for (const auto& s : a.parameters) out.emplace(s.name(), s.unit());
  }
  return out;
}

namespace {

ValidationReport resolve_into(EnvironmentConfig& config, const Registries& regs, const Reporter* outer) {
  ValidationReport local;
  LoadedConfig none;
  Reporter own(local, none);
  const Reporter& rep = outer ? *outer : own;
  const std::size_t before = rep.count();
  const auto units_by_key = config.reference_units();

  auto resolve = [&](FunctorSpec& spec, const std::string& agent, auto& self) -> void {
    for (auto& [param, key] : spec.references) {
      const std::string scoped = agent.empty() ? std::string() : agent + "/" + key;
      if (!scoped.empty() && units_by_key.count(scoped)) {
        key = scoped;
      } else if (!units_by_key.count(key)) {
        rep(relative(rep, join(join(spec.path, "references"), param)), ErrorCode::UnknownReference,
            "no reference-store key '" + key + "'" + (agent.empty() ? "" : " for agent '" + agent + "'"));
      }
    }
    for (auto& c : spec.wrapped) {
      if (c.spec) {
        auto child = std::make_shared<FunctorSpec>(*c.spec);
        self(*child, agent, self);
        c.spec = child;
      }
    }
  };
  for (auto& a : config.agents) {
    for (auto* list : {&a.glues, &a.dones, &a.rewards}) {
      for (auto& s : *list) resolve(s, a.name, resolve);
    }
  }
  for (auto& s : config.shared_dones) resolve(s, "", resolve);

  if (rep.count() == before) {
    for (const auto& a : config.agents) {
      for (const auto* list : {&a.glues, &a.dones, &a.rewards}) {
        for (const auto& s : *list) check_reference_dimensions(s, units_by_key, regs, rep);
      }
    }
    for (const auto& s : config.shared_dones) check_reference_dimensions(s, units_by_key, regs, rep);
  }
  return local;
}

}  // namespace

ValidationReport resolve_references(EnvironmentConfig& config, const Registries& registries) {
  return resolve_into(config, registries, nullptr);
}

std::map<std::pair<std::string, std::string>, PartProperty> part_properties(const EnvironmentConfig& config,
                                                                           const Registries& regs) {
  std::map<std::pair<std::string, std::string>, PartProperty> out;
  std::map<std::string, std::string> types;
  for (const auto& p : config.platforms) types[p.name] = p.type;
  for (const auto& a : config.agents) {
    for (const auto& part : a.parts) {
      const auto& factory = regs.parts.resolve_part(part.group, config.simulator, types.at(part.platform));
      auto made = factory(part.name, part.config);
      out.insert_or_assign({part.platform, part.name}, made->property());
    }
  }
  return out;
}

std::vector<GraphRoot> graph_roots(const EnvironmentConfig& config) {
  std::vector<GraphRoot> roots;
  for (const auto& a : config.agents) {
    const std::string platform = a.platforms.empty() ? std::string() : a.platforms.front();
    for (const auto& s : a.glues) roots.push_back({FunctorKind::glue, s, a.name, platform});
    for (const auto& s : a.dones) roots.push_back({FunctorKind::done, s, a.name, platform});
    for (const auto& s : a.rewards) roots.push_back({FunctorKind::reward, s, a.name, platform});
  }
  for (const auto& s : config.shared_dones) roots.push_back({FunctorKind::shared_done, s, "", ""});
  FunctorSpec horizon;
  horizon.functor = "EpisodeHorizon";
  horizon.name = "horizon";
  // No fixed horizon: the done reads the environment's current one.
  horizon.path = "horizon";
  roots.push_back({FunctorKind::shared_done, horizon, "", ""});
  return roots;
}

BuildContext build_context(const EnvironmentConfig& config,
                           std::map<std::pair<std::string, std::string>, PartProperty> properties) {
  BuildContext ctx;
  auto props = std::make_shared<std::map<std::pair<std::string, std::string>, PartProperty>>(std::move(properties));
  ctx.part_property = [props](const std::string& platform, const std::string& part) -> const PartProperty* {
    auto it = props->find({platform, part});
    return it == props->end() ? nullptr : &it->second;
  };
  auto units_by_key = std::make_shared<std::map<std::string, Unit>>(config.reference_units());
  ctx.reference_unit = [units_by_key](const std::string& key) -> std::optional<Unit> {
    auto it = units_by_key->find(key);
    if (it == units_by_key->end()) return std::nullopt;
    return it->second;
  };
  return ctx;
}

AgentValidation validate_agent(const LoadedConfig& loaded, const Registries& registries) {
  AgentValidation out;
  Reporter rep(out.report, loaded);
  auto a = parse_agent(loaded.tree, rep, registries);
  if (a && out.report.ok()) {
    // Keys from the agent's own store can be checked without an environment.
    std::map<std::string, Unit> local;
    for (const auto& p : a->parameters) {
      if (std::find(a->reference_keys.begin(), a->reference_keys.end(), p.name()) != a->reference_keys.end()) {
        local.emplace(p.name().substr(a->name.size() + 1), p.unit());
      }
    }
    for (const auto* list : {&a->glues, &a->dones, &a->rewards}) {
      for (const auto& s : *list) check_reference_dimensions(s, local, registries, rep);
    }
  }
  if (out.report.ok()) out.config = std::move(a);
  return out;
}

EnvironmentValidation validate_environment(const LoadedConfig& loaded, const Registries& regs) {
  EnvironmentValidation out;
  Reporter rep(out.report, loaded);
  const json& tree = loaded.tree;
  if (!expect(tree, json::value_t::object, rep, "", "an environment mapping")) return out;
  unknown_keys(tree, {"simulator", "platforms", "agents", "shared_dones", "episode_end_mode", "horizon",
                      "reference_store", "space_check_mode"},
               rep, "");
  EnvironmentConfig env;
  env.tree = tree;

  const SimulatorEntry* sim = nullptr;
  if (!tree.contains("simulator")) {
    rep("simulator", ErrorCode::MissingField, "environment requires 'simulator'");
  } else {
    const json& s = tree["simulator"];
    std::string at = "simulator";
    if (s.is_string()) {
      env.simulator = s.get<std::string>();
    } else if (expect(s, json::value_t::object, rep, at, "a simulator mapping")) {
      unknown_keys(s, {"name", "config"}, rep, at);
      if (!s.contains("name")) {
        rep("simulator/name", ErrorCode::MissingField, "simulator requires 'name'");
      } else if (expect(s["name"], json::value_t::string, rep, "simulator/name", "a simulator name")) {
        env.simulator = s["name"].get<std::string>();
        at = "simulator/name";
      }
      if (s.contains("config") && s["config"].is_object()) env.simulator_config = s["config"];
    }
    if (!env.simulator.empty()) {
      sim = regs.simulators.find(env.simulator);
      if (!sim) {
        rep(at, ErrorCode::InvalidValue, "unknown simulator '" + env.simulator + "'");
      } else if (s.is_object() && s.contains("config")) {
        check_config(sim->config_schema, s["config"], rep, "simulator/config");
      }
    }
  }

  std::set<std::string> platform_names;
  if (!tree.contains("platforms")) {
    rep("platforms", ErrorCode::MissingField, "environment requires 'platforms'");
  } else if (expect(tree["platforms"], json::value_t::array, rep, "platforms", "a list of platforms")) {
    for (std::size_t i = 0; i < tree["platforms"].size(); ++i) {
      const json& p = tree["platforms"][i];
      const std::string pr = join("platforms", std::to_string(i));
      if (!expect(p, json::value_t::object, rep, pr, "a platform mapping")) continue;
      unknown_keys(p, {"name", "type", "init"}, rep, pr);
      PlatformConfig pc;
      if (!p.contains("name")) {
        rep(join(pr, "name"), ErrorCode::MissingField, "platform requires 'name'");
        continue;
      }
      if (!expect(p["name"], json::value_t::string, rep, join(pr, "name"), "a platform name")) continue;
      pc.name = p["name"].get<std::string>();
      if (!platform_names.insert(pc.name).second) {
        rep(join(pr, "name"), ErrorCode::InvalidValue, "second platform named '" + pc.name + "'");
      }
      if (sim && sim->platform_types.size() == 1) pc.type = sim->platform_types.front();
      if (p.contains("type") && expect(p["type"], json::value_t::string, rep, join(pr, "type"), "a platform type")) {
        pc.type = p["type"].get<std::string>();
      }
      const Schema* init_schema = nullptr;
      if (sim) {
        if (std::find(sim->platform_types.begin(), sim->platform_types.end(), pc.type) == sim->platform_types.end()) {
          rep(join(pr, "type"), ErrorCode::InvalidValue,
              "simulator '" + env.simulator + "' has no platform type '" + pc.type + "'");
        } else {
          init_schema = &sim->init_schema.at(pc.type);
        }
      }
      const std::string ir = join(pr, "init");
      json init = p.contains("init") ? p["init"] : json::object();
      if (init.is_null()) init = json::object();
      if (expect(init, json::value_t::object, rep, ir, "a mapping of init parameters")) {
        for (const auto& [k, v] : init.items()) {
          const ParamSchema* ps = init_schema ? find_param(*init_schema, k) : nullptr;
          if (init_schema && !ps) {
            rep(join(ir, k), ErrorCode::UnknownField, "platform type '" + pc.type + "' has no init parameter '" + k + "'");
            continue;
          }
          auto spec = parse_parameter(pc.name + "/" + k, v, rep, join(ir, k),
                                      ps ? ps->dimension : std::optional<Dimension>{});
          if (spec) pc.init.push_back(std::move(*spec));
        }
        if (init_schema) {
          for (const auto& ps : *init_schema) {
            if (ps.required && !init.contains(ps.name)) {
              rep(join(ir, ps.name), ErrorCode::MissingField, "missing required init parameter '" + ps.name + "'");
            }
          }
        }
      }
      env.platforms.push_back(std::move(pc));
    }
  }

  if (!tree.contains("agents")) {
    rep("agents", ErrorCode::MissingField, "environment requires 'agents'");
  } else if (expect(tree["agents"], json::value_t::array, rep, "agents", "a list of agents")) {
    if (tree["agents"].empty()) rep("agents", ErrorCode::MissingField, "environment requires at least one agent");
    const fs::path base = loaded.base_dir.empty() ? fs::path(".") : loaded.base_dir;
    std::set<std::string> agent_names;
    for (std::size_t i = 0; i < tree["agents"].size(); ++i) {
      const json& item = tree["agents"][i];
      const std::string ar = join("agents", std::to_string(i));
      std::optional<AgentConfig> agent;
      if (item.is_string()) {
        LoadedConfig sub;
        try {
          sub = load_config(base / item.get<std::string>());
        } catch (const Error& e) {
          rep(ar, e.code(), e.detail());
          continue;
        }
        Reporter sub_rep(out.report, sub, "", ar);
        agent = parse_agent(sub.tree, sub_rep, regs);
        env.tree["agents"][i] = sub.tree;
      } else {
        agent = parse_agent(item, rep.sub(ar), regs);
      }
      if (!agent) continue;
      if (!agent_names.insert(agent->name).second) {
        rep(join(ar, "agent"), ErrorCode::InvalidValue, "second agent named '" + agent->name + "'");
      }
      for (std::size_t j = 0; j < agent->platforms.size(); ++j) {
        if (!env.platforms.empty() && !platform_names.count(agent->platforms[j])) {
          rep(join(ar, join("platforms", std::to_string(j))), ErrorCode::UnknownReference,
              "agent platform '" + agent->platforms[j] + "' is not declared by the environment");
        }
      }
      env.agents.push_back(std::move(*agent));
    }
  }

  env.shared_dones = parse_functor_list(tree, "shared_dones", FunctorKind::shared_done, rep, regs, false);

  if (tree.contains("episode_end_mode")) {
    const json& m = tree["episode_end_mode"];
    if (m == "all_agents_done") {
      env.end_mode = EpisodeEndMode::all_agents_done;
    } else if (m == "any_agent_done") {
      env.end_mode = EpisodeEndMode::any_agent_done;
    } else {
      rep("episode_end_mode", ErrorCode::InvalidValue, "episode_end_mode is all_agents_done or any_agent_done");
    }
  }
  if (tree.contains("horizon")) {
    const json& h = tree["horizon"];
    if (!h.is_number_integer()) {
      rep("horizon", ErrorCode::TypeMismatch, std::string("expected an integer, got ") + type_name(h));
    } else if (h.get<long long>() < 1) {
      rep("horizon", ErrorCode::InvalidValue, "horizon must be >= 1");
    } else {
      env.horizon = h.get<std::size_t>();
    }
  }
  if (tree.contains("reference_store")) {
    env.reference_store = parse_parameter_map(tree["reference_store"], "", rep, "reference_store");
  }
  if (tree.contains("space_check_mode")) {
    if (auto m = parse_space_check(tree["space_check_mode"], rep)) env.space_check = *m;
  }

  if (out.report.ok()) resolve_into(env, regs, &rep);
  if (out.report.ok()) {
    std::map<std::pair<std::string, std::string>, PartProperty> props;
    std::map<std::string, std::string> types;
    for (const auto& p : env.platforms) types[p.name] = p.type;
    for (const auto& a : env.agents) {
      for (const auto& part : a.parts) {
        try {
          const auto& factory = regs.parts.resolve_part(part.group, env.simulator, types.at(part.platform));
          props.insert_or_assign({part.platform, part.name}, factory(part.name, part.config)->property());
        } catch (const Error& e) {
          rep(relative(rep, part.path), e.code(), e.detail());
        } catch (const std::exception& e) {
          rep(relative(rep, join(part.path, "config")), ErrorCode::InvalidValue, e.what());
        }
      }
    }
    if (out.report.ok()) {
      try {
        build_graph(graph_roots(env), regs.functors, build_context(env, std::move(props)));
      } catch (const SpecError& e) {
        rep(e.path(), e.code(), e.detail());
      } catch (const Error& e) {
        rep("", e.code(), e.detail());
      } catch (const std::exception& e) {
        rep("", ErrorCode::InvalidValue, e.what());
      }
    }
  }
  if (out.report.ok()) out.config = std::move(env);
  return out;
}

ValidationReport validate_file(const fs::path& path, const Registries& registries) {
  ValidationReport report;
  try {
    const LoadedConfig loaded = load_config(path);
    switch (detect_kind(loaded.tree)) {
      case ConfigKind::agent:
        return validate_agent(loaded, registries).report;
      case ConfigKind::environment:
        return validate_environment(loaded, registries).report;
      case ConfigKind::unknown:
        report.errors.push_back({"", ErrorCode::MissingField,
                                 "not an agent file ('agent' key) or environment file ('simulator' key)",
                                 loaded.locate("")});
        return report;
    }
  } catch (const Error& e) {
    report.errors.push_back({"", e.code(), e.detail(), std::nullopt});
  } catch (const std::exception& e) {
    report.errors.push_back({"", ErrorCode::ParseError, e.what(), std::nullopt});
  }
  return report;
}

ParameterSpec parameter_spec_from_json(const std::string& name, const json& j) {
  ValidationReport report;
  LoadedConfig none;
  Reporter rep(report, none);
  auto spec = parse_parameter(name, j, rep, "");
  if (!spec) {
    const auto& e = report.errors.front();
    throw Error(e.code, (e.path.empty() ? std::string() : e.path + ": ") + e.message);
  }
  return *spec;
}

EnvironmentConfig load_environment(const fs::path& path, const Registries& registries) {
  auto v = validate_environment(load_config(path), registries);
  if (!v.config) throw Error(ErrorCode::InvalidValue, "invalid environment '" + path.string() + "':\n" + v.report.to_string());
  return std::move(*v.config);
}

}  // namespace envforge
