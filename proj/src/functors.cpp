#include "envforge/functors.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "envforge/error.hpp"
#include "envforge/rng.hpp"
#include "envforge/simulators.hpp"

namespace envforge {

std::string_view to_string(FunctorKind kind) noexcept {
  switch (kind) {
    case FunctorKind::glue: return "glue";
    case FunctorKind::reward: return "reward";
    case FunctorKind::done: return "done";
    case FunctorKind::shared_done: return "shared_done";
  }
  return "glue";
}

std::string_view to_string(DoneStatusCode code) noexcept {
  switch (code) {
    case DoneStatusCode::WIN: return "WIN";
    case DoneStatusCode::PARTIAL_WIN: return "PARTIAL_WIN";
    case DoneStatusCode::DRAW: return "DRAW";
    case DoneStatusCode::PARTIAL_LOSS: return "PARTIAL_LOSS";
    case DoneStatusCode::LOSS: return "LOSS";
  }
  return "DRAW";
}

std::optional<DoneStatusCode> done_status_from_string(std::string_view name) noexcept {
  for (auto c : {DoneStatusCode::WIN, DoneStatusCode::PARTIAL_WIN, DoneStatusCode::DRAW,
                 DoneStatusCode::PARTIAL_LOSS, DoneStatusCode::LOSS}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::string default_functor_name(const FunctorSpec& spec) {
  if (!spec.name.empty()) return spec.name;
  for (const char* key : {"sensor", "controller"}) {
    if (spec.config.is_object() && spec.config.contains(key) && spec.config[key].is_string()) {
      return spec.functor + "_" + spec.config[key].get<std::string>();
    }
  }
  if (spec.wrapped.size() == 1) {
    const auto& c = spec.wrapped.front();
    return spec.functor + "_" + (c.spec ? default_functor_name(*c.spec) : c.ref);
  }
  return spec.functor;
}

// ---------------------------------------------------------------------------

const Platform* EpisodeState::platform(const std::string& name) const {
  return simulator ? simulator->platform(name) : nullptr;
}

const Quantity& EpisodeState::reference(const std::string& key) const {
  if (!references) throw Error(ErrorCode::UnknownReference, "no reference store bound");
  return references->lookup(key);
}

const Observation& EpisodeState::output(std::size_t node) const {
  if (node >= outputs.size() || !outputs[node]) {
    throw std::logic_error("functor node " + std::to_string(node) + " has no output this step");
  }
  return *outputs[node];
}

const DoneResult* EpisodeState::done_for(const std::string& agent) const {
  auto it = dones_this_step.find(agent);
  return it == dones_this_step.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------

const ChildBinding& FunctorInit::only_child() const {
  if (children.size() != 1) {
    throw Error(ErrorCode::InvalidValue, "functor '" + name + "' expects exactly one wrapped glue, got " +
                                             std::to_string(children.size()));
  }
  return children.front();
}

const ChildBinding* FunctorInit::child(std::string_view role) const {
  for (const auto& c : children) {
    if (c.role == role) return &c;
  }
  return nullptr;
}

Extractor::Extractor(const ChildBinding& child, const std::optional<ExtractorSpec>& spec)
    : node_(child.node) {
  if (!child.glue) throw Error(ErrorCode::UnknownExtractorTarget, "extractor target is not a glue");
  const auto space = child.glue->observation_space();
  if (spec && spec->key) {
    key_ = *spec->key;
  } else if (space.size() == 1) {
    key_ = space.begin()->first;
  } else {
    throw Error(ErrorCode::UnknownExtractorTarget,
                "extractor needs a key: target glue has " + std::to_string(space.size()) +
                    " observation entries");
  }
  auto it = space.find(key_);
  if (it == space.end()) {
    throw Error(ErrorCode::UnknownExtractorTarget, "target glue has no observation key '" + key_ + "'");
  }
  space_ = it->second;
  if (spec && spec->index) {
    index_ = *spec->index;
    if (*index_ >= space_.size()) {
      throw Error(ErrorCode::UnknownExtractorTarget,
                  "extractor index " + std::to_string(*index_) + " out of range for '" + key_ + "'");
    }
  }
}

Quantity Extractor::value(const EpisodeState& state) const {
  const Quantity& q = state.output(node_).at(key_);
  if (index_) return Quantity(q[*index_], q.unit());
  return q;
}

Box Extractor::space() const {
  if (!index_) return space_;
  return Box{{space_.low[*index_]}, {space_.high[*index_]}, space_.unit};
}

QuantitySource QuantitySource::from(const FunctorInit& init, const std::string& param, Unit target,
                                    std::optional<Quantity> fallback) {
  QuantitySource s;
  s.target_ = target;
  if (auto it = init.references.find(param); it != init.references.end()) {
    s.key_ = it->second;
    if (init.context && init.context->reference_unit) {
      if (auto unit = init.context->reference_unit(s.key_); unit && !check_compatibility(*unit, target)) {
        throw Error(ErrorCode::DimensionMismatch,
                    "functor '" + init.name + "': reference '" + s.key_ + "' for '" + param +
                        "' is " + std::string(to_string(unit->dimension())) + ", expected " +
                        std::string(to_string(target.dimension())));
      }
    }
    return s;
  }
  if (init.config.contains(param) && !init.config[param].is_null()) {
    s.constant_ = convert(quantity_from_json(init.config[param]), target);
    return s;
  }
  if (fallback) {
    s.constant_ = convert(*fallback, target);
    return s;
  }
  throw Error(ErrorCode::MissingField, "functor '" + init.name + "' requires '" + param + "'");
}

Quantity QuantitySource::get(const EpisodeState& state) const {
  if (constant_) return *constant_;
  return convert(state.reference(key_), target_);
}

// ---------------------------------------------------------------------------

void FunctorRegistry::add(const std::string& name, FunctorEntry entry) {
  if (frozen_) {
    throw Error(ErrorCode::RegistryFrozen, "cannot register functor '" + name + "' after freeze");
  }
  entries_.insert_or_assign(name, std::move(entry));
}

const FunctorEntry* FunctorRegistry::find(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> FunctorRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, e] : entries_) out.push_back(n);
  return out;
}

Glue* FunctorNode::glue() const { return dynamic_cast<Glue*>(impl.get()); }
Done* FunctorNode::done() const { return dynamic_cast<Done*>(impl.get()); }
Reward* FunctorNode::reward() const { return dynamic_cast<Reward*>(impl.get()); }

std::optional<std::size_t> FunctorGraph::find(const std::string& id) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id == id) return i;
  }
  return std::nullopt;
}

void FunctorGraph::reset_episode() {
  for (auto& n : nodes_) n.impl->reset_episode();
}

// ---------------------------------------------------------------------------

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool kind_accepts(FunctorKind requested, FunctorKind registered) {
  if (requested == registered) return true;
  return requested == FunctorKind::shared_done && registered == FunctorKind::done;
}

class GraphBuilder {
 public:
  GraphBuilder(const std::vector<GraphRoot>& roots, const FunctorRegistry& registry,
               const BuildContext& context)
      : roots_(roots), registry_(registry), context_(context) {
    for (std::size_t i = 0; i < roots_.size(); ++i) {
      if (roots_[i].kind != FunctorKind::glue) continue;
      glue_roots_.emplace(std::make_pair(roots_[i].agent, default_functor_name(roots_[i].spec)), i);
    }
  }

  std::pair<std::vector<FunctorNode>, std::vector<std::size_t>> build() {
    std::vector<std::size_t> root_nodes;
    root_nodes.reserve(roots_.size());
    for (std::size_t i = 0; i < roots_.size(); ++i) root_nodes.push_back(compile_root(i));
    return {std::move(nodes_), std::move(root_nodes)};
  }

 private:
  std::size_t compile_root(std::size_t r) {
    if (auto it = compiled_.find(r); it != compiled_.end()) return it->second;
    const GraphRoot& root = roots_[r];
    if (std::find(stack_.begin(), stack_.end(), r) != stack_.end()) {
      std::string cycle;
      bool on = false;
      for (std::size_t s : stack_) {
        if (s == r) on = true;
        if (on) cycle += default_functor_name(roots_[s].spec) + " -> ";
      }
      cycle += default_functor_name(root.spec);
      throw Error(ErrorCode::CycleDetected, "functor cycle: " + cycle);
    }
    stack_.push_back(r);
    const std::size_t node = compile(root.spec, root.kind, root.agent, root.platform);
    stack_.pop_back();
    compiled_.emplace(r, node);
    return node;
  }

  std::size_t compile(const FunctorSpec& spec, FunctorKind kind, const std::string& agent,
                      const std::string& platform) {
    try {
      return compile_unchecked(spec, kind, agent, platform);
    } catch (const SpecError&) {
      throw;
    } catch (const Error& e) {
      throw SpecError(e.code(), e.detail(), spec.path);
    }
  }

  std::size_t compile_unchecked(const FunctorSpec& spec, FunctorKind kind, const std::string& agent,
                                const std::string& platform) {
    const FunctorEntry* entry = registry_.find(spec.functor);
    if (!entry) {
      throw Error(ErrorCode::UnknownFunctor, "unknown functor '" + spec.functor + "' at " + spec.path);
    }
    if (!kind_accepts(kind, entry->kind)) {
      throw Error(ErrorCode::TypeMismatch, "functor '" + spec.functor + "' is a " +
                                               std::string(to_string(entry->kind)) + ", used as a " +
                                               std::string(to_string(kind)) + " at " + spec.path);
    }

    std::vector<ChildBinding> children;
    nlohmann::json child_ids = nlohmann::json::array();
    for (const auto& w : spec.wrapped) {
      std::size_t idx;
      if (w.spec) {
        idx = compile(*w.spec, FunctorKind::glue, agent, platform);
      } else {
        auto it = glue_roots_.find(std::make_pair(agent, w.ref));
        if (it == glue_roots_.end()) {
          throw Error(ErrorCode::UnknownExtractorTarget,
                      "'" + default_functor_name(spec) + "' wraps unknown glue '" + w.ref + "' at " +
                          spec.path);
        }
        idx = compile_root(it->second);
      }
      children.push_back(ChildBinding{w.role, idx, nodes_[idx].glue()});
      child_ids.push_back(nlohmann::json::array({w.role, nodes_[idx].id}));
    }
    if (children.size() < entry->min_children || children.size() > entry->max_children) {
      throw Error(ErrorCode::InvalidValue,
                  "functor '" + spec.functor + "' takes " + std::to_string(entry->min_children) +
                      ".." + std::to_string(entry->max_children) + " wrapped glues, got " +
                      std::to_string(children.size()) + " at " + spec.path);
    }

    nlohmann::json config = apply_defaults(entry->schema, spec.config);
    if (entry->uses_platform && !config.contains("platform") && !platform.empty()) {
      config["platform"] = platform;
    }
    if (kind == FunctorKind::reward || kind == FunctorKind::done) config["__agent"] = agent;

    nlohmann::json key;
    key["kind"] = std::string(to_string(kind));
    key["functor"] = spec.functor;
    key["config"] = config;
    key["references"] = spec.references;
    key["children"] = child_ids;
    if (spec.extractor) {
      nlohmann::json ex = nlohmann::json::object();
      if (spec.extractor->key) ex["key"] = *spec.extractor->key;
      if (spec.extractor->index) ex["index"] = *spec.extractor->index;
      key["extractor"] = ex;
    }
    std::string canonical = key.dump();
    if (auto it = by_canonical_.find(canonical); it != by_canonical_.end()) return it->second;

    FunctorInit init;
    init.name = default_functor_name(spec);
    init.config = config;
    init.references = spec.references;
    init.children = children;
    init.extractor = spec.extractor;
    init.context = &context_;

    FunctorNode node;
    node.id = hex64(fnv1a64(canonical));
    node.canonical = canonical;
    node.kind = kind;
    node.functor = spec.functor;
    node.name = init.name;
    node.agent = agent;
    for (const auto& c : children) node.children.emplace_back(c.role, c.node);
    node.impl = entry->factory(init);
    if (!node.impl) throw std::logic_error("factory for '" + spec.functor + "' returned null");
    const bool type_ok = (kind == FunctorKind::glue && node.glue()) ||
                         (kind == FunctorKind::reward && node.reward()) ||
                         ((kind == FunctorKind::done || kind == FunctorKind::shared_done) && node.done());
    if (!type_ok) {
      throw std::logic_error("factory for '" + spec.functor + "' built the wrong functor type");
    }

    nodes_.push_back(std::move(node));
    const std::size_t idx = nodes_.size() - 1;
    by_canonical_.emplace(std::move(canonical), idx);
    return idx;
  }

  const std::vector<GraphRoot>& roots_;
  const FunctorRegistry& registry_;
  const BuildContext& context_;
  std::vector<FunctorNode> nodes_;
  std::map<std::string, std::size_t> by_canonical_;
  std::map<std::pair<std::string, std::string>, std::size_t> glue_roots_;
  std::map<std::size_t, std::size_t> compiled_;
  std::vector<std::size_t> stack_;
};

}  // namespace

FunctorGraph build_graph(const std::vector<GraphRoot>& roots, const FunctorRegistry& registry,
                         const BuildContext& context) {
  auto [nodes, root_nodes] = GraphBuilder(roots, registry, context).build();
  FunctorGraph g;
  g.nodes_ = std::move(nodes);
  g.roots_ = std::move(root_nodes);
  for (auto phase : {FunctorKind::glue, FunctorKind::done, FunctorKind::reward}) {
    for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
      FunctorKind k = g.nodes_[i].kind == FunctorKind::shared_done ? FunctorKind::done : g.nodes_[i].kind;
      if (k == phase) g.schedule_.push_back(i);
    }
  }
  return g;
}

}  // namespace envforge
