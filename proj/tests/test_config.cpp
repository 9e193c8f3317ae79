#include "doctest.h"

#include <fstream>
#include <sstream>

#include "envforge/config.hpp"
#include "envforge/error.hpp"
#include "support.hpp"

using namespace envforge;
namespace fs = std::filesystem;

namespace {

struct GoldenEntry {
  std::string file;
  std::string code;
  std::string path;
};

std::vector<GoldenEntry> golden() {
  std::ifstream in(testing::data_dir() / "invalid" / "golden.txt");
  std::vector<GoldenEntry> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    GoldenEntry e;
    is >> e.file >> e.code >> e.path;
    if (e.path == "-") e.path.clear();
    out.push_back(e);
  }
  return out;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("golden corpus of invalid configs") {
  const auto entries = golden();
  REQUIRE(entries.size() >= 10);
  for (const auto& e : entries) {
    CAPTURE(e.file);
    const auto report = validate_file(testing::data_dir() / "invalid" / e.file);
    REQUIRE_FALSE(report.ok());
    CHECK(std::string(to_string(report.errors.front().code)) == e.code);
    CHECK(report.errors.front().path == e.path);
  }
}

TEST_CASE("shipped configs validate cleanly") {
  for (const char* f : {"docking/env.yml", "docking/agent.yml", "cartpole/agent.yml", "cartpole/env.yml",
                        "cartpole/agent_composed.yml", "cartpole/env_composed.yml"}) {
    CAPTURE(f);
    const auto report = validate_file(testing::config_dir() / f);
    CHECK(report.to_string() == "0 errors\n");
  }
}

TEST_CASE("list-position includes splice items in place") {
  const auto dir = testing::scratch("includes");
  write(dir / "two.yml", "- {functor: ConstantStepReward, name: b}\n- {functor: ConstantStepReward, name: c}\n");
  write(dir / "one.yml", "functor: ConstantStepReward\nname: d\n");
  write(dir / "main.yml",
        "rewards:\n  - {functor: ConstantStepReward, name: a}\n  - include: two.yml\n  - include: one.yml\n");
  const auto loaded = load_config(dir / "main.yml");
  const auto& r = loaded.tree.at("rewards");
  REQUIRE(r.size() == 4);
  CHECK(r[0]["name"] == "a");
  CHECK(r[1]["name"] == "b");
  CHECK(r[2]["name"] == "c");
  CHECK(r[3]["name"] == "d");
  // locations point into the file that wrote the node
  const auto loc = loaded.locate("rewards/2/name");
  REQUIRE(loc.has_value());
  CHECK(fs::path(loc->file).filename() == "two.yml");
  CHECK(loc->line == 2);
  const auto main_loc = loaded.locate("rewards/0/name");
  REQUIRE(main_loc.has_value());
  CHECK(fs::path(main_loc->file).filename() == "main.yml");
  CHECK(main_loc->line == 2);
}

TEST_CASE("include failures") {
  const auto dir = testing::scratch("include_errors");
  write(dir / "a.yml", "items:\n  - include: b.yml\n");
  write(dir / "b.yml", "- include: a_list.yml\n");
  write(dir / "a_list.yml", "- include: b.yml\n");
  write(dir / "bad.yml", "items: [1, 2\n");
  auto code_of = [](const fs::path& p) {
    try {
      load_config(p);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidValue;
  };
  CHECK(code_of(dir / "a.yml") == ErrorCode::IncludeCycle);
  CHECK(code_of(dir / "bad.yml") == ErrorCode::ParseError);
  CHECK(code_of(dir / "absent.yml") == ErrorCode::FileNotFound);
}

TEST_CASE("report format") {
  const auto report = validate_file(testing::data_dir() / "invalid" / "unknown_functor.yml");
  const auto text = report.to_string();
  CHECK(text.find("glues/0/functor: UnknownFunctor:") == 0);
  CHECK(text.find("unknown_functor.yml:") != std::string::npos);
  CHECK(text.substr(text.size() - 8) == "1 error\n");
}

TEST_CASE("kind detection") {
  CHECK(detect_kind(nlohmann::json{{"agent", "x"}}) == ConfigKind::agent);
  CHECK(detect_kind(nlohmann::json{{"simulator", "x"}}) == ConfigKind::environment);
  CHECK(detect_kind(nlohmann::json::array()) == ConfigKind::unknown);
  const auto report = validate_file(testing::data_dir() / "invalid" / "golden.txt");
  CHECK_FALSE(report.ok());
}

TEST_CASE("parameter specs from config") {
  const auto u = parameter_spec_from_json(
      "x", nlohmann::json::parse(R"({"distribution": {"kind": "uniform", "low": 1, "high": 2}, "unit": "meter"})"));
  CHECK(std::get<Uniform>(u.distribution()).high == 2.0);
  CHECK(u.unit() == units::meter());
  const auto c = parameter_spec_from_json("y", nlohmann::json::parse(R"({"value": 3, "unit": "second"})"));
  CHECK(std::get<Constant>(c.distribution()).value == 3.0);
  CHECK_THROWS_AS(parameter_spec_from_json(
                      "z", nlohmann::json::parse(R"({"distribution": {"kind": "uniform", "low": 3, "high": 2}, "unit": "meter"})")),
                  Error);
  CHECK_THROWS_AS(
      parameter_spec_from_json("z", nlohmann::json::parse(R"({"distribution": {"kind": "cauchy"}, "unit": "meter"})")),
      Error);
}

TEST_CASE("agent-local references resolve before global ones") {
  const auto env = testing::docking_env();
  bool found = false;
  for (const auto& d : env.agents.at(0).dones) {
    if (d.references.count("dock_radius")) {
      CHECK(d.references.at("dock_radius") == "deputy/dock_radius");
      found = true;
    }
  }
  CHECK(found);
  const auto units_by_key = env.reference_units();
  CHECK(units_by_key.at("deputy/dock_radius") == units::meter());
}

TEST_CASE("global store and unknown references") {
  const std::string agent_extra =
      "reference_store:\n  dock_radius: {value: 0.5, unit: meter}\n";
  auto v = validate_environment(parse_config(testing::docking_text(-5, 0, 100, agent_extra),
                                             testing::config_dir() / "docking"));
  REQUIRE(v.report.ok());
  // the agent's own key shadows the global one
  CHECK(v.config->agents[0].dones[0].references.at("dock_radius") == "deputy/dock_radius");

  const std::string text =
      "simulator: {name: Docking1dSimulator}\nplatforms:\n  - name: deputy\n    init:\n"
      "      x0: {value: 1.0, unit: meter}\n      xdot0: {value: 0.0, unit: meter_per_second}\n"
      "agents:\n  - agent: deputy\n    platforms: [deputy]\n    parts: [{part: Sensor_Position}]\n"
      "    glues: [{functor: ObserveSensor, config: {sensor: Sensor_Position}}]\n"
      "    dones:\n      - functor: DockingSuccess\n        references: {dock_radius: nowhere, max_velocity: alsonowhere}\n";
  v = validate_environment(parse_config(text));
  REQUIRE_FALSE(v.report.ok());
  CHECK(v.report.errors.front().code == ErrorCode::UnknownReference);
}
