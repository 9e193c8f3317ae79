#include "doctest.h"

#include <cmath>
#include <map>

#include "envforge/epp.hpp"
#include "envforge/error.hpp"
#include "oracles/oracles.hpp"

using namespace envforge;

TEST_CASE("increment updater reaches its limit after exactly six applications") {
  ParameterSpec spec("start", Uniform{0.0, 2.4}, units::meter(), {IncrementUpdater{"high", 0.1, 3.0}});
  for (int i = 1; i <= 5; ++i) {
    spec.apply_updaters();
    CHECK(*hyperparameter(spec.distribution(), "high") < 3.0);
  }
  spec.apply_updaters();
  CHECK(*hyperparameter(spec.distribution(), "high") == 3.0);
  for (int i = 0; i < 20; ++i) spec.apply_updaters();
  CHECK(*hyperparameter(spec.distribution(), "high") == 3.0);
  CHECK(*hyperparameter(spec.distribution(), "low") == 0.0);
  CHECK(spec.applications() == 26);
}

TEST_CASE("updaters keep distribution invariants") {
  ParameterSpec spec("w", Uniform{0.0, 1.0}, units::none(), {IncrementUpdater{"low", 0.5, std::nullopt}});
  for (int i = 0; i < 4; ++i) spec.apply_updaters();
  const auto& u = std::get<Uniform>(spec.distribution());
  CHECK(u.low <= u.high);
  CHECK_NOTHROW(check_distribution(spec.distribution()));
}

TEST_CASE("unknown updater target") {
  try {
    ParameterSpec("p", Uniform{0.0, 1.0}, units::none(), {IncrementUpdater{"median", 0.1, std::nullopt}});
    FAIL("expected UnknownHyperparameter");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownHyperparameter);
  }
}

TEST_CASE("invalid distributions") {
  CHECK_THROWS_AS(check_distribution(Uniform{2.0, 1.0}), Error);
  CHECK_THROWS_AS(check_distribution(TruncatedGaussian{0.0, 0.0, -1.0, 1.0}), Error);
  CHECK_THROWS_AS(check_distribution(TruncatedGaussian{0.0, 1.0, 1.0, 1.0}), Error);
  CHECK_THROWS_AS(check_distribution(DiscreteChoice{{}, {}}), Error);
  CHECK_THROWS_AS(check_distribution(DiscreteChoice{{1.0, 2.0}, {1.0}}), Error);
}

TEST_CASE("truncated gaussian quantile matches bisection on the CDF") {
  const TruncatedGaussian cases[] = {{0.0, 1.0, -0.5, 0.5}, {1.0, 2.0, -3.0, 0.5}, {0.0, 0.1, 0.2, 0.9}, {5.0, 1.0, -1.0, 8.0}};
  for (const auto& tg : cases) {
    for (int i = 0; i <= 20; ++i) {
      const double u = i / 20.0;
      const double want = oracle::truncated_normal_quantile(tg.mu, tg.sigma, tg.low, tg.high, u);
      CHECK(truncated_normal_quantile(tg, u) == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("ten thousand truncated gaussian samples stay in bounds") {
  const TruncatedGaussian tg{0.0, 1.0, -0.5, 0.5};
  Rng rng(1234);
  double lo = 1, hi = -1;
  for (int i = 0; i < 10000; ++i) {
    const double x = sample_distribution(tg, rng);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  CHECK(lo >= -0.5);
  CHECK(hi <= 0.5);
  CHECK(lo < -0.45);
  CHECK(hi > 0.45);
}

TEST_CASE("support containment over many seeds") {
  const Distribution ds[] = {Uniform{-2.0, 3.0}, TruncatedGaussian{10.0, 1.0, -1.0, 1.0}, Constant{4.0},
                             DiscreteChoice{{1.0, 5.0, 9.0}, {0.2, 0.0, 0.8}}};
  for (const auto& d : ds) {
    ParameterSpec spec("p", d, units::none());
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      const double x = spec.sample(seed).scalar();
      std::visit(
          [&](const auto& dist) {
            using T = std::decay_t<decltype(dist)>;
            if constexpr (std::is_same_v<T, Uniform>) {
              REQUIRE((x >= dist.low && x <= dist.high));
            } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
              REQUIRE((x >= dist.low && x <= dist.high));
            } else if constexpr (std::is_same_v<T, Constant>) {
              REQUIRE(x == dist.value);
            } else {
              REQUIRE((x == 1.0 || x == 9.0));
            }
          },
          d);
    }
  }
}

TEST_CASE("sampling is deterministic in seed and name") {
  EpisodeParameterProvider epp;
  epp.add(ParameterSpec("a", Uniform{0.0, 1.0}, units::meter()));
  epp.add(ParameterSpec("b", Uniform{0.0, 1.0}, units::meter()));
  const auto s1 = epp.sample_episode(42);
  const auto s2 = epp.sample_episode(42);
  CHECK(s1 == s2);
  CHECK(s1.at("a") != s1.at("b"));
  CHECK(epp.sample_episode(43).at("a") != s1.at("a"));
  CHECK_THROWS_AS(epp.add(ParameterSpec("a", Constant{1.0}, units::meter())), std::invalid_argument);
}

TEST_CASE("discrete choice follows its weights") {
  ParameterSpec spec("c", DiscreteChoice{{0.0, 1.0}, {0.25, 0.75}}, units::none());
  int ones = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) ones += spec.sample(s).scalar() == 1.0 ? 1 : 0;
  const double sd = std::sqrt(0.75 * 0.25 / 10000);
  CHECK(std::abs(ones / 10000.0 - 0.75) < 4 * sd);
}

TEST_CASE("fix_value pins a parameter") {
  EpisodeParameterProvider epp;
  epp.add(ParameterSpec("x0", Uniform{-12.0, -8.0}, units::meter(), {IncrementUpdater{"high", 0.5, std::nullopt}}));
  epp.fix_value("x0", Quantity(-1000.0, units::centimeter()));
  CHECK(epp.sample_episode(9).at("x0").scalar() == doctest::Approx(-10.0).epsilon(1e-15));
  CHECK(epp.sample_episode(9).at("x0").unit() == units::meter());
  epp.apply_training_result({});
  CHECK(epp.sample_episode(10).at("x0") == epp.sample_episode(9).at("x0"));
  try {
    epp.fix_value("x0", Quantity(1.0, units::second()));
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  try {
    epp.fix_value("nope", Quantity(1.0, units::meter()));
    FAIL("expected UnknownReference");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownReference);
  }
}

TEST_CASE("reference store publishes declared keys") {
  ReferenceStore store;
  store.declare("r");
  try {
    store.lookup("r");
    FAIL("expected NotYetSampled");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotYetSampled);
  }
  SampledParameters sp;
  sp.values.emplace("r", Quantity(0.1, units::meter()));
  store.publish(sp);
  CHECK(store.lookup("r").scalar() == 0.1);
  try {
    store.lookup("missing");
    FAIL("expected UnknownReference");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownReference);
  }
}
