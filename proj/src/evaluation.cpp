#include "envforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "envforge/error.hpp"
#include "envforge/rng.hpp"
#include "envforge/schema.hpp"

namespace envforge {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Artifacts

namespace {

// Non-finite readings are legal in observations; JSON has no literal for them.
json number_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double number_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw Error(ErrorCode::IoError, "artifact: bad number " + j.dump());
}

json q_to_json(const Quantity& q) {
  json value;
  if (q.size() == 1) {
    value = number_to_json(q[0]);
  } else {
    value = json::array();
    for (double v : q.values()) value.push_back(number_to_json(v));
  }
  return {{"value", value}, {"unit", std::string(q.unit().name())}};
}

Quantity q_from_json(const json& j) {
  const Unit unit = parse_unit(j.at("unit").get<std::string>());
  const json& v = j.at("value");
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& e : v) out.push_back(number_from_json(e));
    return Quantity(std::move(out), unit);
  }
  return Quantity(number_from_json(v), unit);
}

json qmap_to_json(const std::map<std::string, Quantity>& m) {
  json j = json::object();
  for (const auto& [k, q] : m) j[k] = q_to_json(q);
  return j;
}

std::map<std::string, Quantity> qmap_from_json(const json& j) {
  std::map<std::string, Quantity> m;
  for (const auto& [k, v] : j.items()) m.emplace(k, q_from_json(v));
  return m;
}

json done_to_json(const DoneResult& d) {
  return {{"code", std::string(to_string(d.code))}, {"truncated", d.truncated}, {"source", d.source}};
}

DoneResult done_from_json(const json& j) {
  auto code = done_status_from_string(j.at("code").get<std::string>());
  if (!code) throw Error(ErrorCode::IoError, "artifact: unknown done code " + j.at("code").dump());
  return DoneResult{*code, j.at("truncated").get<bool>(), j.at("source").get<std::string>()};
}

json numbers_to_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = number_to_json(v);
  return j;
}

std::map<std::string, double> numbers_from_json(const json& j) {
  std::map<std::string, double> m;
  for (const auto& [k, v] : j.items()) m.emplace(k, number_from_json(v));
  return m;
}

}  // namespace

std::string serialize_artifact(const EpisodeArtifact& a) {
  std::string out;
  auto line = [&](const json& j) {
    out += j.dump();
    out += '\n';
  };
  line({{"type", "header"},
        {"schema", kArtifactSchema},
        {"case_id", a.case_id},
        {"seed", a.seed},
        {"horizon", a.horizon},
        {"parameters", qmap_to_json(a.parameters)}});
  for (const auto& s : a.steps) {
    json rec = {{"type", "step"}, {"step", s.step}};
    json obs = json::object(), act = json::object(), rew = json::object(), dones = json::object(),
         plats = json::object();
    for (const auto& [agent, o] : s.observations) obs[agent] = qmap_to_json(o);
    for (const auto& [agent, o] : s.actions) act[agent] = qmap_to_json(o);
    for (const auto& [agent, r] : s.rewards) rew[agent] = numbers_to_json(r);
    for (const auto& [agent, d] : s.dones) dones[agent] = done_to_json(d);
    for (const auto& [plat, st] : s.platform_states) plats[plat] = qmap_to_json(st);
    rec["observations"] = std::move(obs);
    rec["actions"] = std::move(act);
    rec["rewards"] = std::move(rew);
    rec["dones"] = std::move(dones);
    rec["platforms"] = std::move(plats);
    rec["environment"] = s.environment;
    line(rec);
  }
  json agents = json::object();
  for (const auto& [agent, o] : a.outcome) {
    agents[agent] = {{"status", o.status ? done_to_json(*o.status) : json(nullptr)},
                     {"total_reward", number_to_json(o.total_reward)},
                     {"components", numbers_to_json(o.component_totals)}};
  }
  line({{"type", "outcome"}, {"agents", agents}});
  return out;
}

EpisodeArtifact deserialize_artifact(const std::string& text) {
  EpisodeArtifact a;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  bool header = false, outcome = false;
  try {
    while (std::getline(in, raw)) {
      ++lineno;
      if (raw.empty()) continue;
      const json rec = json::parse(raw);
      const auto type = rec.at("type").get<std::string>();
      if (!header) {
        if (type != "header") throw Error(ErrorCode::IoError, "artifact: first record must be the header");
        if (rec.at("schema").get<std::string>() != kArtifactSchema) {
          throw Error(ErrorCode::IoError, "artifact: unsupported schema " + rec.at("schema").dump());
        }
        a.case_id = rec.at("case_id").get<std::string>();
        a.seed = rec.at("seed").get<std::uint64_t>();
        a.horizon = rec.at("horizon").get<std::size_t>();
        a.parameters = qmap_from_json(rec.at("parameters"));
        header = true;
      } else if (outcome) {
        throw Error(ErrorCode::IoError, "artifact: records after the outcome record");
      } else if (type == "step") {
        StepRecord s;
        s.step = rec.at("step").get<std::size_t>();
        for (const auto& [agent, o] : rec.at("observations").items()) s.observations.emplace(agent, qmap_from_json(o));
        for (const auto& [agent, o] : rec.at("actions").items()) s.actions.emplace(agent, qmap_from_json(o));
        for (const auto& [agent, r] : rec.at("rewards").items()) s.rewards.emplace(agent, numbers_from_json(r));
        for (const auto& [agent, d] : rec.at("dones").items()) s.dones.emplace(agent, done_from_json(d));
        for (const auto& [plat, st] : rec.at("platforms").items()) s.platform_states.emplace(plat, qmap_from_json(st));
        s.environment = rec.at("environment");
        a.steps.push_back(std::move(s));
      } else if (type == "outcome") {
        for (const auto& [agent, o] : rec.at("agents").items()) {
          AgentOutcome out;
          if (!o.at("status").is_null()) out.status = done_from_json(o.at("status"));
          out.total_reward = number_from_json(o.at("total_reward"));
          out.component_totals = numbers_from_json(o.at("components"));
          a.outcome.emplace(agent, std::move(out));
        }
        outcome = true;
      } else {
        throw Error(ErrorCode::IoError, "artifact: unknown record type '" + type + "'");
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(ErrorCode::IoError, "artifact line " + std::to_string(lineno) + ": " + e.detail());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, "artifact line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!header) throw Error(ErrorCode::IoError, "artifact: missing header record");
  if (!outcome) throw Error(ErrorCode::IoError, "artifact: missing outcome record");
  return a;
}

void write_artifact(const EpisodeArtifact& artifact, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << serialize_artifact(artifact);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

EpisodeArtifact read_artifact(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize_artifact(ss.str());
  } catch (const Error& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.detail());
  }
}

std::vector<EpisodeArtifact> read_artifacts(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "no artifact directory '" + dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EpisodeArtifact> out;
  for (const auto& f : files) out.push_back(read_artifact(f));
  return out;
}

// ---------------------------------------------------------------------------
// Test cases

namespace {

bool valid_case_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

std::vector<TestCase> parse_test_cases(const json& tree, const EnvironmentConfig& env) {
  if (!tree.is_object() || !tree.contains("cases") || !tree["cases"].is_array()) {
    throw Error(ErrorCode::MissingField, "cases file requires a 'cases' list");
  }
  EpisodeParameterProvider provider = env.make_provider();
  std::vector<TestCase> out;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < tree["cases"].size(); ++i) {
    const json& c = tree["cases"][i];
    const std::string where = "cases/" + std::to_string(i);
    if (!c.is_object()) throw Error(ErrorCode::TypeMismatch, where + ": expected a mapping");
    for (const auto& [k, v] : c.items()) {
      if (k != "id" && k != "parameters" && k != "horizon" && k != "seed") {
        throw Error(ErrorCode::UnknownField, where + ": unknown key '" + k + "'");
      }
    }
    TestCase tc;
    if (!c.contains("id") || !c["id"].is_string()) throw Error(ErrorCode::MissingField, where + ": requires a string 'id'");
    tc.id = c["id"].get<std::string>();
    if (!valid_case_id(tc.id)) {
      throw Error(ErrorCode::InvalidValue, where + ": case id '" + tc.id + "' must use [A-Za-z0-9_.-]");
    }
    if (!ids.insert(tc.id).second) throw Error(ErrorCode::InvalidValue, where + ": duplicate case id '" + tc.id + "'");
    if (c.contains("parameters")) {
      if (!c["parameters"].is_object()) throw Error(ErrorCode::TypeMismatch, where + "/parameters: expected a mapping");
      for (const auto& [name, v] : c["parameters"].items()) {
        Quantity q = [&] {
          try {
            return quantity_from_json(v);
          } catch (const Error& e) {
            throw Error(e.code(), where + "/parameters/" + name + ": " + e.detail());
          }
        }();
        try {
          provider.fix_value(name, q);
        } catch (const Error& e) {
          throw Error(e.code(), where + "/parameters/" + name + ": " + e.detail());
        }
        tc.parameters.emplace(name, std::move(q));
      }
    }
    if (c.contains("horizon")) {
      if (!c["horizon"].is_number_integer() || c["horizon"].get<long long>() < 1) {
        throw Error(ErrorCode::InvalidValue, where + "/horizon: expected an integer >= 1");
      }
      tc.horizon = c["horizon"].get<std::size_t>();
    }
    if (c.contains("seed")) {
      if (!c["seed"].is_number_integer() || c["seed"].get<long long>() < 0) {
        throw Error(ErrorCode::InvalidValue, where + "/seed: expected a non-negative integer");
      }
      tc.seed = c["seed"].get<std::uint64_t>();
    }
    out.push_back(std::move(tc));
  }
  return out;
}

std::vector<TestCase> load_test_cases(const fs::path& path, const EnvironmentConfig& env) {
  return parse_test_cases(load_config(path).tree, env);
}

// ---------------------------------------------------------------------------
// Evaluate

EpisodeArtifact rollout_case(const EnvironmentConfig& config, const TestCase& tc, const EvaluationOptions& options) {
  EnvironmentOptions env_options;
  env_options.policy_override = options.policy;
  env_options.policy_override_config = options.policy_config;
  Environment env(config, env_options);
  for (const auto& [name, q] : tc.parameters) env.provider().fix_value(name, q);
  if (tc.horizon) env.set_horizon(*tc.horizon);

  EpisodeArtifact a;
  a.case_id = tc.id;
  a.seed = tc.seed ? *tc.seed : derive_seed(options.base_seed, tc.id);
  a.horizon = env.horizon();

  std::map<std::string, std::map<std::string, double>> totals;
  auto observer = [&](const std::map<std::string, Action>& actions, const StepResult& r) {
    StepRecord s;
    s.step = env.step_count();
    s.observations = r.observations;
    s.actions = actions;
    s.rewards = r.reward_components;
    s.dones = r.status;
    for (const auto& [name, platform] : env.simulator().platforms()) s.platform_states.emplace(name, platform->state());
    s.environment = env.simulator().state();
    for (const auto& [agent, comps] : r.reward_components) {
      for (const auto& [c, v] : comps) totals[agent][c] += v;
    }
    a.steps.push_back(std::move(s));
  };
  const EpisodeSummary summary = run_episode(env, a.seed, observer);
  a.parameters = env.sampled().values;

  for (const auto& agent : env.agents()) {
    AgentOutcome o;
    o.status = summary.outcome.at(agent.name);
    o.total_reward = summary.total_reward.at(agent.name);
    for (const auto& [name, node] : agent.rewards) o.component_totals.emplace(name, totals[agent.name][name]);
    a.outcome.emplace(agent.name, std::move(o));
  }
  return a;
}

std::vector<std::optional<EpisodeArtifact>> evaluate_cases(const EnvironmentConfig& env,
                                                           const std::vector<TestCase>& cases,
                                                           const EvaluationOptions& options,
                                                           std::vector<std::string>* errors) {
  std::vector<std::optional<EpisodeArtifact>> results(cases.size());
  std::vector<std::string> messages(cases.size());
  (void)default_registries();  // initialize shared registries outside the parallel region
  const int workers = std::max(1, options.workers);
  const long n = static_cast<long>(cases.size());

  auto run_one = [&](long i) {
    try {
      results[i] = rollout_case(env, cases[i], options);
    } catch (const std::exception& e) {
      messages[i] = e.what();
    }
  };

  if (workers == 1) {
    for (long i = 0; i < n; ++i) run_one(i);
  } else {
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) run_one(i);
  }
  if (errors) *errors = std::move(messages);
  return results;
}

std::vector<CaseResult> evaluate(const EnvironmentConfig& env, const std::vector<TestCase>& cases, const fs::path& out,
                                 const EvaluationOptions& options) {
  const fs::path dir = out / "artifacts";
  {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path probe = dir / ".write_probe";
    std::ofstream f(probe);
    if (ec || !f) throw Error(ErrorCode::IoError, "output directory '" + out.string() + "' is not writable");
    f.close();
    fs::remove(probe, ec);
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".jsonl") fs::remove(e.path(), ec);
    }
  }

  std::vector<std::string> errors;
  auto artifacts = evaluate_cases(env, cases, options, &errors);

  std::vector<CaseResult> results;
  json summary = json::array();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    CaseResult r{cases[i].id, {}, errors[i]};
    if (artifacts[i]) {
      r.artifact = dir / (cases[i].id + ".jsonl");
      write_artifact(*artifacts[i], r.artifact);
    }
    summary.push_back({{"id", r.id},
                       {"artifact", r.artifact.empty() ? json(nullptr) : json(r.artifact.filename().string())},
                       {"error", r.error.empty() ? json(nullptr) : json(r.error)}});
    results.push_back(std::move(r));
  }
  std::ofstream f(out / "evaluation.json");
  f << json{{"cases", summary}}.dump(2) << "\n";
  if (!f) throw Error(ErrorCode::IoError, "failed writing '" + (out / "evaluation.json").string() + "'");
  return results;
}

// ---------------------------------------------------------------------------
// Metrics

std::string_view to_string(MetricKind kind) noexcept {
  return kind == MetricKind::terminal ? "terminal" : "non_terminal";
}

void MetricRegistry::add(const std::string& type, MetricEntry entry) { entries_.insert_or_assign(type, std::move(entry)); }

const MetricEntry* MetricRegistry::find(const std::string& type) const {
  auto it = entries_.find(type);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> MetricRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

namespace {

bool solved(const EpisodeArtifact& a) {
  if (a.outcome.empty()) return false;
  return std::all_of(a.outcome.begin(), a.outcome.end(), [](const auto& kv) {
    return kv.second.status && kv.second.status->code == DoneStatusCode::WIN;
  });
}

double numeric(const json& j, const std::string& what) {
  if (!j.is_number()) throw Error(ErrorCode::InvalidValue, what + ": expected a number, got " + j.dump());
  return j.get<double>();
}

MetricRegistry make_builtin_metrics() {
  MetricRegistry r;
  r.add("success_count", {MetricKind::terminal,
                          [](const auto& arts, const auto&, const json&) {
                            long n = 0;
                            for (const auto& a : arts) n += solved(a) ? 1 : 0;
                            return MetricValue{MetricKind::terminal, n};
                          },
                          {}});
  r.add("success_rate", {MetricKind::terminal,
                         [](const auto& arts, const std::vector<const MetricValue*>& in, const json&) {
                           if (arts.empty()) return MetricValue{MetricKind::terminal, 0.0};
                           double count = 0;
                           if (!in.empty()) {
                             count = numeric(in[0]->value, "success_rate");
                           } else {
                             for (const auto& a : arts) count += solved(a) ? 1 : 0;
                           }
                           return MetricValue{MetricKind::terminal, count / static_cast<double>(arts.size())};
                         },
                         {"success_count"}});
  r.add("episode_length", {MetricKind::non_terminal,
                           [](const auto& arts, const auto&, const json&) {
                             json v = json::object();
                             for (const auto& a : arts) v[a.case_id] = a.steps.size();
                             return MetricValue{MetricKind::non_terminal, v};
                           },
                           {}});
  r.add("total_reward", {MetricKind::non_terminal,
                         [](const auto& arts, const auto&, const json&) {
                           json v = json::object();
                           for (const auto& a : arts) {
                             double t = 0;
                             for (const auto& [agent, o] : a.outcome) t += o.total_reward;
                             v[a.case_id] = t;
                           }
                           return MetricValue{MetricKind::non_terminal, v};
                         },
                         {}});
  r.add("reward_component_proportions",
        {MetricKind::non_terminal,
         [](const auto& arts, const auto&, const json&) {
           std::map<std::string, double> totals;
           for (const auto& a : arts) {
             for (const auto& [agent, o] : a.outcome) {
               for (const auto& [c, v] : o.component_totals) totals[agent + "/" + c] += v;
             }
           }
           double sum = 0;
           for (const auto& [k, v] : totals) sum += std::abs(v);
           json out = json::object();
           for (const auto& [k, v] : totals) out[k] = sum > 0 ? std::abs(v) / sum : 0.0;
           return MetricValue{MetricKind::non_terminal, out};
         },
         {}});
  r.add("done_code_histogram", {MetricKind::non_terminal,
                                [](const auto& arts, const auto&, const json&) {
                                  json out = json::object();
                                  for (auto c : {DoneStatusCode::WIN, DoneStatusCode::PARTIAL_WIN, DoneStatusCode::DRAW,
                                                 DoneStatusCode::PARTIAL_LOSS, DoneStatusCode::LOSS}) {
                                    out[std::string(to_string(c))] = 0;
                                  }
                                  out["NONE"] = 0;
                                  for (const auto& a : arts) {
                                    for (const auto& [agent, o] : a.outcome) {
                                      const std::string key = o.status ? std::string(to_string(o.status->code)) : "NONE";
                                      out[key] = out[key].template get<long>() + 1;
                                    }
                                  }
                                  return MetricValue{MetricKind::non_terminal, out};
                                },
                                {}});
  r.add("mean", {MetricKind::terminal,
                 [](const auto&, const std::vector<const MetricValue*>& in, const json&) {
                   if (in.size() != 1) throw Error(ErrorCode::InvalidValue, "mean takes exactly one input metric");
                   const json& v = in[0]->value;
                   double sum = 0;
                   std::size_t n = 0;
                   if (v.is_number()) {
                     sum = v.get<double>();
                     n = 1;
                   } else {
                     for (const auto& [k, e] : v.items()) {
                       sum += numeric(e, "mean input '" + k + "'");
                       ++n;
                     }
                   }
                   return MetricValue{MetricKind::terminal, n ? sum / static_cast<double>(n) : 0.0};
                 },
                 {}});
  r.add("step_reward_series", {MetricKind::non_terminal,
                               [](const auto& arts, const auto&, const json&) {
                                 json out = json::object();
                                 for (const auto& a : arts) {
                                   json series = json::array();
                                   for (const auto& s : a.steps) {
                                     double t = 0;
                                     for (const auto& [agent, comps] : s.rewards) {
                                       for (const auto& [c, v] : comps) t += v;
                                     }
                                     series.push_back(t);
                                   }
                                   out[a.case_id] = std::move(series);
                                 }
                                 return MetricValue{MetricKind::non_terminal, out};
                               },
                               {}});
  return r;
}

}  // namespace

const MetricRegistry& builtin_metrics() {
  static const MetricRegistry registry = make_builtin_metrics();
  return registry;
}

std::vector<MetricSpec> default_metric_specs() {
  std::vector<MetricSpec> out;
  for (const char* t : {"success_count", "success_rate", "episode_length", "total_reward",
                        "reward_component_proportions", "done_code_histogram"}) {
    out.push_back(MetricSpec{t, t, {}, json::object()});
  }
  return out;
}

std::vector<MetricSpec> parse_metric_specs(const json& tree) {
  if (tree.is_null() || (tree.is_object() && !tree.contains("metrics"))) return default_metric_specs();
  if (!tree.is_object() || !tree["metrics"].is_array()) {
    throw Error(ErrorCode::TypeMismatch, "metrics file requires a 'metrics' list");
  }
  if (tree["metrics"].empty()) return default_metric_specs();
  std::vector<MetricSpec> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < tree["metrics"].size(); ++i) {
    const json& m = tree["metrics"][i];
    const std::string where = "metrics/" + std::to_string(i);
    MetricSpec s;
    if (m.is_string()) {
      s.name = s.type = m.get<std::string>();
    } else if (m.is_object()) {
      for (const auto& [k, v] : m.items()) {
        if (k != "name" && k != "type" && k != "inputs" && k != "config") {
          throw Error(ErrorCode::UnknownField, where + ": unknown key '" + k + "'");
        }
      }
      if (!m.contains("type") || !m["type"].is_string()) throw Error(ErrorCode::MissingField, where + ": requires 'type'");
      s.type = m["type"].get<std::string>();
      s.name = m.contains("name") ? m["name"].get<std::string>() : s.type;
      if (m.contains("inputs")) {
        const json& in = m["inputs"];
        if (in.is_string()) {
          s.inputs.push_back(in.get<std::string>());
        } else if (in.is_array()) {
          for (const auto& e : in) s.inputs.push_back(e.get<std::string>());
        } else {
          throw Error(ErrorCode::TypeMismatch, where + "/inputs: expected a name or list of names");
        }
      }
      if (m.contains("config")) s.config = m["config"];
    } else {
      throw Error(ErrorCode::TypeMismatch, where + ": expected a metric name or mapping");
    }
    if (!names.insert(s.name).second) throw Error(ErrorCode::InvalidValue, where + ": duplicate metric '" + s.name + "'");
    out.push_back(std::move(s));
  }
  return out;
}

MetricResults compute_metrics(const std::vector<EpisodeArtifact>& artifacts, const std::vector<MetricSpec>& specs,
                              const MetricRegistry& registry) {
  std::map<std::string, const MetricSpec*> by_name;
  std::map<std::string, std::vector<std::string>> inputs;
  for (const auto& s : specs) {
    const MetricEntry* e = registry.find(s.type);
    if (!e) throw Error(ErrorCode::InvalidValue, "metric '" + s.name + "': unknown type '" + s.type + "'");
    by_name.emplace(s.name, &s);
  }
  for (const auto& s : specs) {
    const MetricEntry* e = registry.find(s.type);
    std::vector<std::string> in = s.inputs;
    if (in.empty()) {
      // Implicit inputs only apply when the default is configured alongside.
      for (const auto& d : e->default_inputs) {
        if (by_name.count(d)) in.push_back(d);
      }
    }
    for (const auto& i : in) {
      if (!by_name.count(i)) throw Error(ErrorCode::UnknownMetricInput, "metric '" + s.name + "' needs unknown input '" + i + "'");
    }
    inputs.emplace(s.name, std::move(in));
  }

  std::vector<std::string> order;
  std::map<std::string, int> mark;  // 1 visiting, 2 done
  std::vector<std::string> stack;
  std::function<void(const std::string&)> visit = [&](const std::string& n) {
    if (mark[n] == 2) return;
    if (mark[n] == 1) {
      std::string cycle;
      auto it = std::find(stack.begin(), stack.end(), n);
      for (; it != stack.end(); ++it) cycle += *it + " -> ";
      throw Error(ErrorCode::MetricCycle, "metric cycle " + cycle + n);
    }
    mark[n] = 1;
    stack.push_back(n);
    for (const auto& i : inputs.at(n)) visit(i);
    stack.pop_back();
    mark[n] = 2;
    order.push_back(n);
  };
  for (const auto& s : specs) visit(s.name);

  MetricResults results;
  for (const auto& n : order) {
    const MetricSpec& s = *by_name.at(n);
    const MetricEntry* e = registry.find(s.type);
    std::vector<const MetricValue*> in;
    for (const auto& i : inputs.at(n)) in.push_back(&results.at(i));
    MetricValue v = e->compute(artifacts, in, s.config);
    v.kind = e->kind;
    if (v.kind == MetricKind::terminal && (v.value.is_object() || v.value.is_array())) {
      throw Error(ErrorCode::MetricKindMismatch, "terminal metric '" + n + "' produced a container");
    }
    results.emplace(n, std::move(v));
  }
  return results;
}

json metrics_to_json(const MetricResults& results) {
  json j = json::object();
  for (const auto& [name, v] : results) j[name] = {{"kind", std::string(to_string(v.kind))}, {"value", v.value}};
  return j;
}

MetricResults metrics_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::IoError, "metrics file must be a mapping");
  MetricResults out;
  for (const auto& [name, m] : j.items()) {
    if (!m.is_object() || !m.contains("kind") || !m.contains("value") || !m["kind"].is_string()) {
      throw Error(ErrorCode::IoError, "metric '" + name + "': expected {kind, value}");
    }
    const auto kind = m["kind"].get<std::string>();
    MetricValue v;
    if (kind == "terminal") {
      v.kind = MetricKind::terminal;
    } else if (kind == "non_terminal") {
      v.kind = MetricKind::non_terminal;
    } else {
      throw Error(ErrorCode::IoError, "metric '" + name + "': unknown kind '" + kind + "'");
    }
    v.value = m["value"];
    out.emplace(name, std::move(v));
  }
  return out;
}

MetricResults generate_metrics(const fs::path& out, const std::vector<MetricSpec>& specs) {
  const auto artifacts = read_artifacts(out / "artifacts");
  MetricResults results = compute_metrics(artifacts, specs);
  std::ofstream f(out / "metrics.json", std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write '" + (out / "metrics.json").string() + "'");
  f << metrics_to_json(results).dump(2) << "\n";
  if (!f) throw Error(ErrorCode::IoError, "failed writing '" + (out / "metrics.json").string() + "'");
  return results;
}

// ---------------------------------------------------------------------------
// Visualize

std::vector<VisualizationSpec> parse_visualizations(const json& tree) {
  if (!tree.is_object() || !tree.contains("visualizations") || !tree["visualizations"].is_array()) {
    throw Error(ErrorCode::MissingField, "visualization file requires a 'visualizations' list");
  }
  std::vector<VisualizationSpec> out;
  std::set<std::string> files;
  for (std::size_t i = 0; i < tree["visualizations"].size(); ++i) {
    const json& v = tree["visualizations"][i];
    const std::string where = "visualizations/" + std::to_string(i);
    if (!v.is_object()) throw Error(ErrorCode::TypeMismatch, where + ": expected a mapping");
    for (const auto& [k, e] : v.items()) {
      if (k != "type" && k != "metrics" && k != "title" && k != "output") {
        throw Error(ErrorCode::UnknownField, where + ": unknown key '" + k + "'");
      }
    }
    VisualizationSpec s;
    if (!v.contains("type") || !v["type"].is_string()) throw Error(ErrorCode::MissingField, where + ": requires 'type'");
    s.type = v["type"].get<std::string>();
    if (s.type != "table" && s.type != "html") {
      throw Error(ErrorCode::InvalidValue, where + "/type: expected table or html, got '" + s.type + "'");
    }
    if (v.contains("metrics")) {
      if (v["metrics"].is_string()) {
        s.metrics.push_back(v["metrics"].get<std::string>());
      } else if (v["metrics"].is_array()) {
        for (const auto& m : v["metrics"]) s.metrics.push_back(m.get<std::string>());
      } else {
        throw Error(ErrorCode::TypeMismatch, where + "/metrics: expected a name or list of names");
      }
    }
    s.title = v.value("title", std::string{});
    if (s.type == "html") {
      if (s.metrics.empty()) throw Error(ErrorCode::MissingField, where + ": html plots require 'metrics'");
      s.output = v.value("output", "plot_" + std::to_string(i) + ".html");
      const fs::path p(s.output);
      if (p.has_parent_path() || p.filename() != p || s.output == "." || s.output == "..") {
        throw Error(ErrorCode::InvalidValue, where + "/output: must be a plain file name");
      }
      if (!files.insert(s.output).second) throw Error(ErrorCode::InvalidValue, where + "/output: duplicate file name");
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

const MetricValue& lookup(const MetricResults& results, const std::string& name) {
  auto it = results.find(name);
  if (it == results.end()) throw Error(ErrorCode::UnknownMetric, "no metric named '" + name + "'");
  return it->second;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

// A line chart when the metric maps keys to series, a bar chart when it maps
// keys to numbers.
std::string svg_plot(const std::string& name, const json& value) {
  constexpr double W = 640, H = 320, L = 60, R = 20, T = 20, B = 50;
  std::vector<std::pair<std::string, std::vector<double>>> series;
  bool bars = true;
  if (value.is_array()) {
    std::vector<double> s;
    for (const auto& e : value) s.push_back(numeric(e, name));
    series.emplace_back(name, std::move(s));
    bars = false;
  } else {
    for (const auto& [k, e] : value.items()) {
      if (e.is_array()) {
        bars = false;
        std::vector<double> s;
        for (const auto& x : e) s.push_back(numeric(x, name + "/" + k));
        series.emplace_back(k, std::move(s));
      } else {
        series.emplace_back(k, std::vector<double>{numeric(e, name + "/" + k)});
      }
    }
  }

  double lo = 0, hi = 0;
  std::size_t longest = 1;
  for (const auto& [k, s] : series) {
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    longest = std::max(longest, s.size());
  }
  if (hi == lo) hi = lo + 1;
  const double pw = W - L - R, ph = H - T - B;
  auto y = [&](double v) { return T + ph * (hi - v) / (hi - lo); };

  std::ostringstream os;
  os << "<svg width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
     << "\" role=\"img\"><rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"#fff\"/>";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph << "\" stroke=\"#333\"/>";
  os << "<line x1=\"" << L << "\" y1=\"" << y(0) << "\" x2=\"" << L + pw << "\" y2=\"" << y(0) << "\" stroke=\"#333\"/>";
  os << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(hi) << "</text>";
  os << "<text x=\"" << L - 6 << "\" y=\"" << T + ph << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(lo) << "</text>";

  if (bars) {
    const double slot = pw / static_cast<double>(std::max<std::size_t>(series.size(), 1));
    for (std::size_t i = 0; i < series.size(); ++i) {
      const double v = series[i].second.front();
      const double top = std::min(y(v), y(0)), h = std::abs(y(v) - y(0));
      os << "<rect x=\"" << L + slot * i + slot * 0.15 << "\" y=\"" << top << "\" width=\"" << slot * 0.7
         << "\" height=\"" << h << "\" fill=\"" << kPalette[i % 8] << "\"><title>" << escape(series[i].first) << ": "
         << fmt(v) << "</title></rect>";
      os << "<text x=\"" << L + slot * (i + 0.5) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
         << escape(series[i].first) << "</text>";
    }
  } else {
    const double dx = longest > 1 ? pw / static_cast<double>(longest - 1) : 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      os << "<polyline fill=\"none\" stroke=\"" << kPalette[i % 8] << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t j = 0; j < series[i].second.size(); ++j) {
        os << (j ? " " : "") << L + dx * j << "," << y(series[i].second[j]);
      }
      os << "\"><title>" << escape(series[i].first) << "</title></polyline>";
      os << "<text x=\"" << L + 8 + 110 * (i % 5) << "\" y=\"" << H - B + 20 + 14 * (i / 5) << "\" font-size=\"11\" fill=\""
         << kPalette[i % 8] << "\">" << escape(series[i].first) << "</text>";
    }
    os << "<text x=\"" << L + pw << "\" y=\"" << H - 4 << "\" text-anchor=\"end\" font-size=\"11\">step</text>";
  }
  os << "</svg>";
  return os.str();
}

}  // namespace

void render_table(const MetricResults& results, const VisualizationSpec& spec, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> rows;
  if (spec.metrics.empty()) {
    for (const auto& [name, v] : results) {
      if (v.kind == MetricKind::terminal) rows.emplace_back(name, scalar_text(v.value));
    }
  } else {
    for (const auto& name : spec.metrics) {
      const MetricValue& v = lookup(results, name);
      if (v.kind != MetricKind::terminal) {
        throw Error(ErrorCode::MetricKindMismatch, "table rows need terminal metrics; '" + name + "' is non_terminal");
      }
      rows.emplace_back(name, scalar_text(v.value));
    }
  }
  std::size_t w = 6;
  for (const auto& [n, v] : rows) w = std::max(w, n.size());
  if (!spec.title.empty()) out << spec.title << "\n";
  out << std::string("metric") << std::string(w - 6 + 2, ' ') << "value\n";
  out << std::string(w, '-') << "  " << std::string(5, '-') << "\n";
  for (const auto& [n, v] : rows) out << n << std::string(w - n.size() + 2, ' ') << v << "\n";
}

std::string render_html(const MetricResults& results, const VisualizationSpec& spec) {
  std::ostringstream os;
  const std::string title = spec.title.empty() ? "Evaluation metrics" : spec.title;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << escape(title) << "</title>\n"
     << "<style>body{font-family:sans-serif;margin:24px;color:#222}h2{font-size:16px}"
        "section{margin-bottom:28px}</style></head>\n<body>\n<h1>"
     << escape(title) << "</h1>\n";
  for (const auto& name : spec.metrics) {
    const MetricValue& v = lookup(results, name);
    if (v.kind != MetricKind::non_terminal) {
      throw Error(ErrorCode::MetricKindMismatch, "plots need non_terminal metrics; '" + name + "' is terminal");
    }
    os << "<section><h2>" << escape(name) << "</h2>\n" << svg_plot(name, v.value) << "\n</section>\n";
  }
  os << "</body></html>\n";
  return os.str();
}

std::vector<fs::path> visualize(const MetricResults& results, const std::vector<VisualizationSpec>& specs,
                                const fs::path& out, std::ostream& table_out) {
  std::vector<fs::path> written;
  for (const auto& s : specs) {
    if (s.type == "table") {
      render_table(results, s, table_out);
      continue;
    }
    const std::string html = render_html(results, s);
    std::error_code ec;
    fs::create_directories(out, ec);
    const fs::path p = out / s.output;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot write '" + p.string() + "'");
    f << html;
    if (!f) throw Error(ErrorCode::IoError, "failed writing '" + p.string() + "'");
    written.push_back(p);
  }
  return written;
}

}  // namespace envforge
