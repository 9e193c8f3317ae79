#include "doctest.h"

#include <chrono>
#include <cmath>

#include "envforge/error.hpp"
#include "envforge/parts.hpp"
#include "envforge/simulators.hpp"
#include "oracles/oracles.hpp"

using namespace envforge;

namespace {

PlatformInit deputy_init(double x0, double v0) {
  return {"deputy", std::string(Docking1dSimulator::kPlatformType),
          {{"x0", Quantity(x0, units::meter())}, {"xdot0", Quantity(v0, units::meter_per_second())}}};
}

const Docking1dPlatform& deputy_of(const Simulator& sim) {
  return static_cast<const Docking1dPlatform&>(*sim.platform("deputy"));
}

// Reads whatever the test last wrote.
class ProbeSensor : public Sensor {
 public:
  explicit ProbeSensor(Quantity* source) : Sensor("probe", {"probe", Box::uniform(1, -10, 10, units::meter())}),
                                           source_(source) {}

 protected:
  Quantity read(const Platform&) const override { return *source_; }

 private:
  Quantity* source_;
};

}  // namespace

TEST_CASE("constant thrust follows the analytic double integrator") {
  struct Case {
    double x0, v0, thrust, mass, rate;
  };
  const Case cases[] = {{-10.0, 0.0, 1.0, 12.0, 1.0}, {3.7, -0.25, -0.8, 5.0, 10.0}, {0.0, 1.5, 0.3, 12.0, 4.0}};
  for (const auto& c : cases) {
    Docking1dSimulator sim(Docking1dConfig{c.rate, c.mass});
    sim.reset({deputy_init(c.x0, c.v0)});
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int n = 1; n <= 10000; ++n) {
      sim.platform("deputy")->store_action("force", Quantity(c.thrust, units::newton()));
      sim.step();
      const auto want = oracle::docking_analytic(c.x0, c.v0, c.thrust, c.mass, static_cast<long double>(n) / c.rate);
      worst = std::max(worst, static_cast<double>(std::fabs(deputy_of(sim).deputy().x() - want.x)));
      worst = std::max(worst, static_cast<double>(std::fabs(deputy_of(sim).deputy().xdot() - want.v)));
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(worst <= 1e-9);
    CHECK(seconds < 1.0);
    CHECK(std::fabs(sim.sim_time() - 10000.0 / c.rate) <= 1e-12);
  }
}

TEST_CASE("sim_time counts steps over the frame rate") {
  for (double rate : {1.0, 3.0, 50.0, 0.1}) {
    Docking1dSimulator sim(Docking1dConfig{rate, 12.0});
    sim.reset({deputy_init(0, 0)});
    for (int n = 1; n <= 1000; ++n) {
      sim.step();
      REQUIRE(std::fabs(sim.sim_time() - n / rate) <= 1e-12);
    }
    sim.reset({deputy_init(0, 0)});
    CHECK(sim.sim_time() == 0.0);
  }
  CHECK_THROWS_AS(Docking1dSimulator(Docking1dConfig{0.0, 12.0}), std::invalid_argument);
}

TEST_CASE("missing init parameter") {
  Docking1dSimulator sim;
  PlatformInit init{"deputy", std::string(Docking1dSimulator::kPlatformType), {{"x0", Quantity(1.0, units::meter())}}};
  try {
    sim.reset({init});
    FAIL("expected MissingInitParameter");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingInitParameter);
  }
}

TEST_CASE("init parameters convert units") {
  Docking1dSimulator sim;
  sim.reset({{"deputy",
              std::string(Docking1dSimulator::kPlatformType),
              {{"x0", Quantity(-250.0, units::centimeter())}, {"xdot0", Quantity(0.0, units::meter_per_second())}}}});
  CHECK(deputy_of(sim).deputy().x() == doctest::Approx(-2.5).epsilon(1e-15));
}

TEST_CASE("inoperable platforms ignore commands and removal is reported") {
  Docking1dSimulator sim;
  sim.reset({deputy_init(1.0, 0.0)});
  sim.mark_platform_inoperable("deputy");
  sim.platform("deputy")->store_action("force", Quantity(1.0, units::newton()));
  sim.step();
  CHECK(deputy_of(sim).deputy().x() == 1.0);
  CHECK_THROWS_AS(sim.mark_platform_inoperable("ghost"), Error);
  sim.remove_platform("deputy");
  CHECK(sim.take_removed_platforms() == std::vector<std::string>{"deputy"});
  CHECK(sim.take_removed_platforms().empty());
  CHECK(sim.platform("deputy") == nullptr);
}

TEST_CASE("cart-pole rest state is a fixed point") {
  CartPoleSimulator sim;
  sim.reset({{"cartpole", std::string(CartPoleSimulator::kPlatformType), {}}});
  for (int i = 0; i < 1000; ++i) {
    sim.platform("cartpole")->store_action("force", Quantity(0.0, units::newton()));
    sim.step();
  }
  const auto& s = static_cast<const CartPolePlatform&>(*sim.platform("cartpole")).cart();
  CHECK(s.x == 0.0);
  CHECK(s.x_dot == 0.0);
  CHECK(s.theta == 0.0);
  CHECK(s.theta_dot == 0.0);
}

TEST_CASE("cart-pole push sequence matches the reference integrator") {
  CartPoleSimulator sim;
  sim.reset({{"cartpole",
              std::string(CartPoleSimulator::kPlatformType),
              {{"theta0", Quantity(0.02, units::radian())}, {"x_dot0", Quantity(-0.1, units::meter_per_second())}}}});
  oracle::Cart ref;
  ref.theta = 0.02;
  ref.x_dot = -0.1;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double force = (k % 7 < 3) ? 10.0 : -10.0;
    sim.platform("cartpole")->store_action("force", Quantity(force, units::newton()));
    sim.step();
    ref = oracle::cartpole_euler(ref, force);
    const auto& s = static_cast<const CartPolePlatform&>(*sim.platform("cartpole")).cart();
    worst = std::max({worst, std::fabs(s.x - ref.x), std::fabs(s.x_dot - ref.x_dot), std::fabs(s.theta - ref.theta),
                      std::fabs(s.theta_dot - ref.theta_dot)});
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("cart-pole energy is conserved to first order without force") {
  CartPoleConstants c;
  CartPoleState s;
  s.theta = 0.01;
  const double e0 = cartpole_energy(s, c);
  CartPoleState n = s;
  for (int i = 0; i < 5; ++i) n = cartpole_step(n, 0.0, c, 1.0 / c.frame_rate);
  CHECK(std::fabs(cartpole_energy(n, c) - e0) < 1e-3 * std::max(1.0, std::fabs(e0)));
}

TEST_CASE("sensor value hold keeps the last valid measurement") {
  Quantity reading(1.0, units::meter());
  ProbeSensor sensor(&reading);
  Docking1dPlatform platform("p", Deputy1d{});
  CHECK(sensor.measure(platform).scalar() == 1.0);
  reading = Quantity(NAN, units::meter());
  CHECK(sensor.measure(platform).scalar() == 1.0);
  reading = Quantity({1.0, 2.0}, units::meter());
  CHECK(sensor.measure(platform).scalar() == 1.0);
  reading = Quantity(1.0, units::second());
  CHECK(sensor.measure(platform).scalar() == 1.0);
  CHECK(sensor.hold_count() == 3);
  reading = Quantity(250.0, units::centimeter());
  CHECK(sensor.measure(platform).scalar() == doctest::Approx(2.5));

  ProbeSensor fresh(&reading);
  reading = Quantity(INFINITY, units::meter());
  try {
    fresh.measure(platform);
    FAIL("expected NoValidMeasurementYet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoValidMeasurementYet);
  }
}

TEST_CASE("controllers clamp into their bounds") {
  Controller thruster("thrust", {"thrust", Box::uniform(1, -1.0, 1.0, units::newton())}, "force");
  Docking1dPlatform platform("p", Deputy1d{});
  thruster.apply(platform, Quantity(5.0, units::newton()));
  CHECK(platform.action("force")->scalar() == 1.0);
  CHECK(thruster.clamp_count() == 1);
  thruster.apply(platform, Quantity(-0.5, units::newton()));
  CHECK(platform.action("force")->scalar() == -0.5);
  CHECK(thruster.clamp_count() == 1);
  platform.set_operable(false);
  platform.clear_actions();
  thruster.apply(platform, Quantity(0.5, units::newton()));
  CHECK(platform.action("force") == nullptr);
}

TEST_CASE("part registry resolution") {
  PluginRegistry reg;
  register_builtin_parts(reg);
  CHECK(reg.has_group("Sensor_Position"));
  CHECK_NOTHROW(reg.resolve_part("Sensor_Position", Docking1dSimulator::kType, Docking1dSimulator::kPlatformType));
  try {
    reg.resolve_part("Sensor_PoleAngle", Docking1dSimulator::kType, Docking1dSimulator::kPlatformType);
    FAIL("expected NoMatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoMatch);
  }
  try {
    reg.resolve_part("Sensor_Nothing", "x", "y");
    FAIL("expected UnknownGroup");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownGroup);
  }
  reg.freeze();
  CHECK_THROWS_AS(reg.register_part("X", {}, {}), Error);
}
