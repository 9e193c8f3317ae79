#include "doctest.h"

#include <fstream>
#include <sstream>

#include "envforge/error.hpp"
#include "envforge/evaluation.hpp"
#include "support.hpp"

using namespace envforge;
namespace fs = std::filesystem;

namespace {

EpisodeArtifact fake(const std::string& id, std::optional<DoneStatusCode> code, std::map<std::string, double> comps,
                     std::size_t steps = 1) {
  EpisodeArtifact a;
  a.case_id = id;
  a.horizon = 10;
  for (std::size_t i = 1; i <= steps; ++i) {
    StepRecord r;
    r.step = i;
    r.rewards["agent"] = {{"c", 1.0}};
    a.steps.push_back(r);
  }
  AgentOutcome o;
  if (code) o.status = DoneResult{*code, false, "d"};
  for (const auto& [k, v] : comps) o.total_reward += v;
  o.component_totals = std::move(comps);
  a.outcome["agent"] = o;
  return a;
}

std::vector<TestCase> docking_cases() {
  return load_test_cases(testing::config_dir() / "docking" / "cases.yml", testing::docking_env());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("artifact serialization round trip is a fixed point") {
  const auto env = testing::docking_env();
  const auto a = rollout_case(env, docking_cases().at(0), {});
  const std::string text = serialize_artifact(a);
  const auto back = deserialize_artifact(text);
  CHECK(back == a);
  CHECK(serialize_artifact(back) == text);
  CHECK(text.find(kArtifactSchema) != std::string::npos);

  EpisodeArtifact odd = fake("odd", std::nullopt, {{"c", NAN}});
  odd.steps[0].rewards["agent"]["c"] = INFINITY;
  const auto text2 = serialize_artifact(odd);
  CHECK(serialize_artifact(deserialize_artifact(text2)) == text2);

  CHECK_THROWS_AS(deserialize_artifact("{\"type\": \"step\"}\n"), Error);
  CHECK_THROWS_AS(deserialize_artifact("not json\n"), Error);
  CHECK_THROWS_AS(deserialize_artifact(""), Error);
}

TEST_CASE("test case parsing checks parameters against the environment") {
  const auto env = testing::docking_env();
  const auto cases = docking_cases();
  REQUIRE(cases.size() == 5);
  CHECK(cases[3].horizon == 5u);
  CHECK(cases[0].seed == 1u);

  auto code_of = [&](const std::string& yaml) {
    try {
      parse_test_cases(parse_config(yaml).tree, env);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::FileNotFound;
  };
  CHECK(code_of("cases:\n  - id: a\n    parameters: {deputy/nothing: {value: 1, unit: meter}}\n") ==
        ErrorCode::UnknownReference);
  CHECK(code_of("cases:\n  - id: a\n    parameters: {deputy/x0: {value: 1, unit: second}}\n") ==
        ErrorCode::DimensionMismatch);
  CHECK(code_of("cases:\n  - id: a\n  - id: a\n") == ErrorCode::InvalidValue);
  CHECK(code_of("cases:\n  - id: 'bad/id'\n") == ErrorCode::InvalidValue);
}

TEST_CASE("parallel evaluation equals the serial reference") {
  const auto env = testing::docking_env();
  const auto cases = docking_cases();
  EvaluationOptions serial;
  EvaluationOptions parallel;
  parallel.workers = 4;
  const auto a = evaluate_cases(env, cases, serial);
  const auto b = evaluate_cases(env, cases, parallel);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].has_value());
    REQUIRE(b[i].has_value());
    CHECK(serialize_artifact(*a[i]) == serialize_artifact(*b[i]));
  }
}

TEST_CASE("evaluate writes one artifact per case") {
  const auto env = testing::docking_env();
  const auto out = testing::scratch("evaluate_out");
  fs::create_directories(out / "artifacts");
  std::ofstream(out / "artifacts" / "stale.jsonl") << "old\n";
  const auto results = evaluate(env, docking_cases(), out);
  REQUIRE(results.size() == 5);
  for (const auto& r : results) {
    CHECK(r.error.empty());
    CHECK(fs::exists(r.artifact));
  }
  CHECK_FALSE(fs::exists(out / "artifacts" / "stale.jsonl"));
  CHECK(fs::exists(out / "evaluation.json"));
  const auto artifacts = read_artifacts(out / "artifacts");
  REQUIRE(artifacts.size() == 5);
  CHECK(artifacts[0].case_id == "drifting");
}

TEST_CASE("an unwritable output directory fails before any rollout") {
  const auto base = testing::scratch("unwritable");
  std::ofstream(base / "file") << "x";
  try {
    evaluate(testing::docking_env(), docking_cases(), base / "file" / "out");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
  CHECK_FALSE(fs::exists(base / "file" / "out"));
}

TEST_CASE("success metrics") {
  const std::vector<EpisodeArtifact> arts = {fake("a", DoneStatusCode::WIN, {{"c", 1.0}}),
                                             fake("b", DoneStatusCode::LOSS, {{"c", 1.0}}),
                                             fake("c", DoneStatusCode::WIN, {{"c", 1.0}})};
  const auto r = compute_metrics(arts, {{"success_count", "success_count", {}, {}},
                                        {"success_rate", "success_rate", {"success_count"}, {}}});
  CHECK(r.at("success_count").value == 2);
  CHECK(r.at("success_rate").value.get<double>() == 2.0 / 3.0);
  CHECK(r.at("success_rate").kind == MetricKind::terminal);
  // without the count metric the rate counts directly
  const auto direct = compute_metrics(arts, {{"rate", "success_rate", {}, {}}});
  CHECK(direct.at("rate").value.get<double>() == 2.0 / 3.0);
}

TEST_CASE("reward component proportions") {
  const std::vector<EpisodeArtifact> arts = {fake("a", DoneStatusCode::WIN, {{"x", 3.0}, {"y", 1.0}})};
  const auto r = compute_metrics(arts, {{"p", "reward_component_proportions", {}, {}}});
  CHECK(r.at("p").kind == MetricKind::non_terminal);
  CHECK(r.at("p").value.at("agent/x").get<double>() == 0.75);
  CHECK(r.at("p").value.at("agent/y").get<double>() == 0.25);
}

TEST_CASE("metric dependency errors") {
  const std::vector<EpisodeArtifact> arts = {fake("a", DoneStatusCode::WIN, {})};
  try {
    compute_metrics(arts, {{"A", "mean", {"B"}, {}}, {"B", "mean", {"A"}, {}}});
    FAIL("expected MetricCycle");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MetricCycle);
  }
  try {
    compute_metrics(arts, {{"A", "mean", {"ghost"}, {}}});
    FAIL("expected UnknownMetricInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownMetricInput);
  }
  CHECK_THROWS_AS(compute_metrics(arts, {{"A", "no_such_type", {}, {}}}), Error);
}

TEST_CASE("composed metrics and histogram") {
  const std::vector<EpisodeArtifact> arts = {fake("a", DoneStatusCode::WIN, {}, 4), fake("b", std::nullopt, {}, 2),
                                             fake("c", DoneStatusCode::LOSS, {}, 6)};
  const auto specs = parse_metric_specs(nlohmann::json::parse(
      R"({"metrics": ["episode_length", {"name": "mean_len", "type": "mean", "inputs": "episode_length"},
                      "done_code_histogram", "step_reward_series"]})"));
  const auto r = compute_metrics(arts, specs);
  CHECK(r.at("episode_length").value.at("b") == 2);
  CHECK(r.at("mean_len").value.get<double>() == 4.0);
  CHECK(r.at("done_code_histogram").value.at("WIN") == 1);
  CHECK(r.at("done_code_histogram").value.at("NONE") == 1);
  CHECK(r.at("step_reward_series").value.at("c").size() == 6);
  CHECK(metrics_from_json(metrics_to_json(r)).size() == r.size());
  CHECK(default_metric_specs().size() == 6);
  CHECK_THROWS_AS(parse_metric_specs(nlohmann::json::parse(R"({"metrics": ["mean", "mean"]})")), Error);
}

TEST_CASE("table and html rendering") {
  const std::vector<EpisodeArtifact> arts = {fake("a", DoneStatusCode::WIN, {{"c", 1.0}}, 3),
                                             fake("b", DoneStatusCode::LOSS, {{"c", 1.0}}, 2)};
  const auto r = compute_metrics(arts, default_metric_specs());
  std::ostringstream table;
  render_table(r, {"table", {}, "t", ""}, table);
  CHECK(table.str().find("success_rate") != std::string::npos);
  CHECK(table.str().find("0.5") != std::string::npos);

  try {
    std::ostringstream sink;
    render_table(r, {"table", {"nope"}, "t", ""}, sink);
    FAIL("expected UnknownMetric");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownMetric);
  }
  try {
    std::ostringstream sink;
    render_table(r, {"table", {"episode_length"}, "t", ""}, sink);
    FAIL("expected MetricKindMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MetricKindMismatch);
  }

  const std::string html = render_html(r, {"html", {"episode_length"}, "Lengths", "x.html"});
  CHECK(html.find("<svg") != std::string::npos);
  CHECK(html.find("http") == std::string::npos);
  CHECK(html.find("src=") == std::string::npos);
  CHECK(html.find("Lengths") != std::string::npos);
  CHECK_THROWS_AS(render_html(r, {"html", {"success_rate"}, "", "x.html"}), Error);
  CHECK_THROWS_AS(parse_visualizations(nlohmann::json::parse(R"({"visualizations": [{"type": "html"}]})")), Error);
}

TEST_CASE("staged pipeline on the docking cases") {
  const auto env = testing::docking_env();
  const auto out = testing::scratch("pipeline_stages");
  evaluate(env, docking_cases(), out);
  const auto specs = parse_metric_specs(load_config(testing::config_dir() / "docking" / "metrics.yml").tree);
  const auto results = generate_metrics(out, specs);
  CHECK(results.at("success_rate").value.get<double>() == 0.6);
  CHECK(results.at("success_count").value == 3);
  const auto viz = parse_visualizations(load_config(testing::config_dir() / "docking" / "viz.yml").tree);
  std::ostringstream table;
  const auto files = visualize(results, viz, out, table);
  CHECK(table.str().find("0.6") != std::string::npos);
  for (const auto& f : files) CHECK(slurp(f).find("<svg") != std::string::npos);
  CHECK(metrics_from_json(nlohmann::json::parse(slurp(out / "metrics.json"))).at("success_rate").value == 0.6);
}
