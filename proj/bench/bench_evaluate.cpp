// Serial (workers=1) against OpenMP-parallel evaluation of the same test cases.

#include <benchmark/benchmark.h>

#include <filesystem>
#include <string>
#include <vector>

#include "envforge/config.hpp"
#include "envforge/evaluation.hpp"

using namespace envforge;

namespace {

const EnvironmentConfig& docking() {
  static const EnvironmentConfig env =
      load_environment(std::filesystem::path(ENVFORGE_SOURCE_DIR) / "configs" / "docking" / "env.yml");
  return env;
}

// Cases spread over start positions; each is a full scripted docking run.
std::vector<TestCase> cases(int n) {
  std::vector<TestCase> out;
  for (int i = 0; i < n; ++i) {
    TestCase c;
    c.id = "case_" + std::to_string(i);
    c.parameters.emplace("deputy/x0", Quantity(-20.0 + 0.37 * i, units::meter()));
    c.parameters.emplace("deputy/xdot0", Quantity(0.0, units::meter_per_second()));
    c.seed = static_cast<std::uint64_t>(i);
    out.push_back(std::move(c));
  }
  return out;
}

void BM_Evaluate(benchmark::State& state) {
  const auto tc = cases(static_cast<int>(state.range(1)));
  EvaluationOptions opts;
  opts.workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto artifacts = evaluate_cases(docking(), tc, opts);
    benchmark::DoNotOptimize(artifacts);
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

}  // namespace

BENCHMARK(BM_Evaluate)->ArgNames({"workers", "cases"})->Args({1, 32})->Args({2, 32})->Args({4, 32})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
