#pragma once

// Independent reference implementations. None of these include library
// headers; tests compare the library against them.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>

namespace oracle {

// Double integrator under constant thrust, evaluated in long double.
struct DockingState {
  long double x;
  long double v;
};

inline DockingState docking_analytic(long double x0, long double v0, long double thrust, long double mass,
                                     long double t) {
  const long double a = thrust / mass;
  return {x0 + v0 * t + 0.5L * a * t * t, v0 + a * t};
}

// Closed-loop bang-bang docking with mass 12 kg, 1 N thrust and dt = 1 s,
// done exactly in integers. Position and velocity are in units of 1/240:
// one step of thrust changes velocity by 20 and position by v +- 10.
struct DockingOutcome {
  int steps;
  std::string code;  // WIN, LOSS, or DRAW at the horizon
};

inline DockingOutcome docking_closed_loop(std::int64_t x240, std::int64_t v240, int horizon) {
  for (int k = 1; k <= horizon; ++k) {
    // speed profile 0.1|x| clamped to [0.05, 1.0] m/s, scaled by 10 to stay integral
    std::int64_t speed10 = std::llabs(x240);
    if (speed10 < 120) speed10 = 120;
    if (speed10 > 2400) speed10 = 2400;
    const std::int64_t desired10 = x240 < 0 ? speed10 : -speed10;
    const std::int64_t dv = 10 * v240 < desired10 ? 20 : -20;
    x240 += v240 + dv / 2;
    v240 += dv;
    if (std::llabs(x240) <= 24) return {k, std::llabs(v240) <= 48 ? "WIN" : "LOSS"};
  }
  return {horizon, "DRAW"};
}

// Classic cart-pole, explicit Euler.
struct Cart {
  double x = 0, x_dot = 0, theta = 0, theta_dot = 0;
};

inline Cart cartpole_euler(Cart s, double force) {
  const double g = 9.8, mc = 1.0, mp = 0.1, l = 0.5, tau = 0.02;
  const double total = mc + mp, pml = mp * l;
  const double c = std::cos(s.theta), sn = std::sin(s.theta);
  const double temp = (force + pml * s.theta_dot * s.theta_dot * sn) / total;
  const double theta_acc = (g * sn - c * temp) / (l * (4.0 / 3.0 - mp * c * c / total));
  const double x_acc = temp - pml * theta_acc * c / total;
  Cart n;
  n.x = s.x + tau * s.x_dot;
  n.x_dot = s.x_dot + tau * x_acc;
  n.theta = s.theta + tau * s.theta_dot;
  n.theta_dot = s.theta_dot + tau * theta_acc;
  return n;
}

// Truncated normal quantile by bisection on the CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double truncated_normal_quantile(double mu, double sigma, double low, double high, double u) {
  // Above the mean, bisect on the survival function to keep upper-tail precision.
  const bool upper = 0.5 * (low + high) > mu;
  auto f = [&](double x) {
    const double z = (x - mu) / sigma;
    return upper ? 0.5 * std::erfc(z / std::sqrt(2.0)) : normal_cdf(z);
  };
  const double a = f(low), b = f(high);
  const double target = a + u * (b - a);
  double lo = low, hi = high;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    // the CDF rises and the survival function falls
    if (upper ? f(mid) > target : f(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
