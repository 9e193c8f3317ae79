#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "envforge/config.hpp"
#include "envforge/environment.hpp"
#include "envforge/error.hpp"
#include "envforge/evaluation.hpp"
#include "envforge/rng.hpp"

namespace envforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string env;
  std::vector<std::string> agents;
  std::string policy;
  std::size_t episodes = 1;
  std::uint64_t seed = 0;
  std::string cases;
  std::string metrics;
  std::string viz;
  std::string out;
  int workers = 1;
  std::string log_level = "warn";
};

// Thrown when a config does not validate; maps to exit code 1.
struct InvalidConfig {};

class Session {
 public:
  Session(std::ostream& out, std::ostream& err, std::shared_ptr<spdlog::logger> log)
      : out_(out), err_(err), log_(std::move(log)) {}

  int validate(const Options& o) {
    std::vector<std::string> files = o.agents;
    if (!o.env.empty()) files.insert(files.begin(), o.env);
    if (files.empty()) {
      err_ << "validate: give --env and/or --agent\n";
      return kRuntimeError;
    }
    bool ok = true;
    for (const auto& f : files) {
      log_->info("validating {}", f);
      const ValidationReport report = validate_file(f);
      if (files.size() > 1) out_ << f << ":\n";
      out_ << report.to_string();
      ok = ok && report.ok();
    }
    return ok ? kOk : kValidationFailed;
  }

  int run(const Options& o) {
    EnvironmentConfig config = load_env(o.env);
    Environment env(config, env_options(o));
    const fs::path dir = prepare_out(o.out);
    fs::create_directories(dir / "episodes");
    json episodes = json::array();
    for (std::size_t i = 0; i < o.episodes; ++i) {
      const std::uint64_t seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
      const EpisodeSummary s = run_episode(env, seed);
      const fs::path csv = dir / "episodes" / ("episode_" + std::to_string(i) + ".csv");
      env.write_episode_csv(csv);
      json outcome = json::object();
      for (const auto& [agent, d] : s.outcome) outcome[agent] = d ? json(std::string(to_string(d->code))) : json(nullptr);
      episodes.push_back({{"episode", i},
                          {"seed", seed},
                          {"steps", s.steps},
                          {"truncated", s.truncated},
                          {"total_reward", s.total_reward},
                          {"outcome", outcome},
                          {"csv", csv.lexically_relative(dir).generic_string()}});
      out_ << "episode " << i << ": " << s.steps << " steps";
      for (const auto& [agent, d] : s.outcome) {
        out_ << ", " << agent << " " << (d ? to_string(d->code) : std::string_view("none")) << " reward "
             << json(s.total_reward.at(agent)).dump();
      }
      out_ << "\n";
      log_->info("episode {} finished after {} steps", i, s.steps);
    }
    json run = env.run_config();
    run["episode_summaries"] = episodes;
    write_text(dir / "run.json", run.dump(2) + "\n");
    return kOk;
  }

  int evaluate(const Options& o) {
    EnvironmentConfig config = load_env(o.env);
    const auto cases = load_cases(o.cases, config);
    const fs::path dir = prepare_out(o.out);
    EvaluationOptions eo;
    if (!o.policy.empty()) eo.policy = o.policy;
    eo.workers = o.workers;
    eo.base_seed = o.seed;
    log_->info("evaluating {} cases with {} worker(s)", cases.size(), o.workers);
    const auto results = envforge::evaluate(config, cases, dir, eo);
    int failed = 0;
    for (const auto& r : results) {
      if (r.error.empty()) {
        log_->debug("case {} -> {}", r.id, r.artifact.string());
      } else {
        ++failed;
        log_->error("case {} failed: {}", r.id, r.error);
        err_ << "case " << r.id << " failed: " << r.error << "\n";
      }
    }
    out_ << "evaluated " << results.size() - failed << "/" << results.size() << " cases into "
         << (dir / "artifacts").string() << "\n";
    return failed ? kRuntimeError : kOk;
  }

  int metrics(const Options& o) {
    const fs::path dir = prepare_out(o.out);
    std::vector<MetricSpec> specs = o.metrics.empty() ? default_metric_specs() : parse_metric_specs(load_config(o.metrics).tree);
    const MetricResults results = generate_metrics(dir, specs);
    out_ << "wrote " << results.size() << " metrics to " << (dir / "metrics.json").string() << "\n";
    return kOk;
  }

  int visualize(const Options& o) {
    const fs::path dir = prepare_out(o.out);
    const auto specs = parse_visualizations(load_config(o.viz).tree);
    const fs::path mfile = dir / "metrics.json";
    std::ifstream in(mfile);
    if (!in) throw Error(ErrorCode::IoError, "cannot read '" + mfile.string() + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError, mfile.string() + ": " + e.what());
    }
    const auto written = envforge::visualize(metrics_from_json(j), specs, dir, out_);
    for (const auto& p : written) log_->info("wrote {}", p.string());
    return kOk;
  }

  int pipeline(const Options& o) {
    const int e = evaluate(o);
    if (e == kValidationFailed) return e;
    metrics(o);
    visualize(o);
    return e;
  }

 private:
  EnvironmentOptions env_options(const Options& o) const {
    EnvironmentOptions eo;
    if (!o.policy.empty()) eo.policy_override = o.policy;
    return eo;
  }

  EnvironmentConfig load_env(const std::string& path) {
    auto v = validate_environment(load_config(path));
    if (!v.report.ok()) {
      err_ << v.report.to_string();
      throw InvalidConfig{};
    }
    return std::move(*v.config);
  }

  std::vector<TestCase> load_cases(const std::string& path, const EnvironmentConfig& env) {
    const LoadedConfig loaded = load_config(path);
    try {
      return parse_test_cases(loaded.tree, env);
    } catch (const Error& e) {
      err_ << path << ": " << e.what() << "\n";
      throw InvalidConfig{};
    }
  }

  fs::path prepare_out(const std::string& out) {
    const fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + out + "': " + ec.message());
    return dir;
  }

  static void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw Error(ErrorCode::IoError, "failed writing '" + p.string() + "'");
  }

  std::ostream& out_;
  std::ostream& err_;
  std::shared_ptr<spdlog::logger> log_;
};

}  // namespace

int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Composable multi-agent environment toolkit", "envforge"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.add_option("--log-level", o.log_level, "trace|debug|info|warn|error|off (ENVFORGE_LOG overrides)")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  auto* validate = app.add_subcommand("validate", "Validate environment and agent config files");
  validate->add_option("--env", o.env, "Environment config")->check(CLI::ExistingFile);
  validate->add_option("--agent", o.agents, "Agent config (repeatable)")->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "Run episodes and write per-episode CSV logs");
  run->add_option("--env", o.env, "Environment config")->required()->check(CLI::ExistingFile);
  run->add_option("--policy", o.policy, "Policy for every agent (default: as configured)");
  run->add_option("--episodes", o.episodes, "Number of episodes")->check(CLI::PositiveNumber);
  run->add_option("--seed", o.seed, "Base seed");
  run->add_option("--out", o.out, "Output directory")->required();

  auto add_eval = [&](CLI::App* c) {
    c->add_option("--env", o.env, "Environment config")->required()->check(CLI::ExistingFile);
    c->add_option("--cases", o.cases, "Test case file")->required()->check(CLI::ExistingFile);
    c->add_option("--policy", o.policy, "Policy for every agent (default: as configured)");
    c->add_option("--seed", o.seed, "Seed for cases that set none");
    c->add_option("--workers", o.workers, "Parallel test-case workers")->check(CLI::PositiveNumber);
    c->add_option("--out", o.out, "Output directory")->required();
  };
  auto* evaluate = app.add_subcommand("evaluate", "Roll out every test case into an artifact");
  add_eval(evaluate);

  auto* metrics = app.add_subcommand("metrics", "Compute metrics over <out>/artifacts");
  metrics->add_option("--metrics", o.metrics, "Metric config (default: built-in set)")->check(CLI::ExistingFile);
  metrics->add_option("--out", o.out, "Output directory")->required();

  auto* visualize = app.add_subcommand("visualize", "Render <out>/metrics.json");
  visualize->add_option("--viz", o.viz, "Visualization config")->required()->check(CLI::ExistingFile);
  visualize->add_option("--out", o.out, "Output directory")->required();

  auto* pipeline = app.add_subcommand("pipeline", "evaluate, metrics and visualize in series");
  add_eval(pipeline);
  pipeline->add_option("--metrics", o.metrics, "Metric config (default: built-in set)")->check(CLI::ExistingFile);
  pipeline->add_option("--viz", o.viz, "Visualization config")->required()->check(CLI::ExistingFile);

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kRuntimeError;
  }

  if (const char* env_level = std::getenv("ENVFORGE_LOG"); env_level && *env_level) o.log_level = env_level;
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("envforge", sink);
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::from_str(o.log_level));

  Session s(out, err, log);
  try {
    if (validate->parsed()) return s.validate(o);
    if (run->parsed()) return s.run(o);
    if (evaluate->parsed()) return s.evaluate(o);
    if (metrics->parsed()) return s.metrics(o);
    if (visualize->parsed()) return s.visualize(o);
    if (pipeline->parsed()) return s.pipeline(o);
  } catch (const InvalidConfig&) {
    return kValidationFailed;
  } catch (const std::exception& e) {
    log->error("{}", e.what());
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kRuntimeError;
}

}  // namespace envforge::cli
