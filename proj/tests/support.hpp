#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "midc/grid.hpp"
#include "midc/oefc.hpp"
#include "midc/scenario.hpp"

namespace midc::test {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(MIDC_FIXTURE_DIR) / name;
}

/// Generator at bus 1, LCC at bus 2, load at bus 3, chained by b = 10.
inline Network three_bus(double lcc_td = 0.1) {
  LccParams l;
  l.name = "LCC1";
  l.bus = 2;
  l.nominal = 1.0;
  l.upper = 1.5;
  l.lower = 0.5;
  l.time_constant = lcc_td;
  l.alpha = 0.05;
  l.adjacent_regulation = 20.0;
  l.cost_e = 30.0;
  l.dc_voltage_kv = 500.0;
  return build_network({{1, BusRole::Generator, 2.0}, {2, BusRole::LccConnected, -1.0}, {3, BusRole::Passive, -2.0}},
                       {{1, 2, 10.0}, {2, 3, 10.0}}, {{1, 10.0, 1.0, 9.0, 0.1}}, {l});
}

/// Generator at bus 1 feeding a passive bus 2 over b = 10.
inline Network two_bus(double load) {
  return build_network({{1, BusRole::Generator, -load}, {2, BusRole::Passive, load}}, {{1, 2, 10.0}},
                       {{1, 10.0, 1.0, 9.0, 0.1}}, {});
}

/// Independent allocation oracle: the balance function
/// g(lambda) = sum clamp(-lambda k_i) + b is piecewise linear and monotone, so
/// sort the breakpoints, find the bracketing segment and interpolate.
struct BreakpointSolution {
  double lambda = 0.0;
  std::vector<double> u_generator;
  std::vector<double> u_lcc;
};

inline BreakpointSolution breakpoint_oracle(const OefcProblem& p) {
  auto gain = [](const OefcLcc& l) { return 1.0 / (2.0 * l.weights.quadratic_weight()); };
  auto balance = [&](double lambda) {
    double s = p.imbalance;
    for (double b : p.beta) s += -lambda / b;
    for (const OefcLcc& l : p.lccs) s += std::clamp(-lambda * gain(l), l.lower, l.upper);
    return s;
  };
  std::vector<double> knots;
  for (const OefcLcc& l : p.lccs) {
    knots.push_back(-l.lower / gain(l));
    knots.push_back(-l.upper / gain(l));
  }
  std::sort(knots.begin(), knots.end());
  double span = 1.0 + std::abs(p.imbalance);
  for (double b : p.beta) span = std::max(span, std::abs(p.imbalance) * b * 2.0);
  double lo = (knots.empty() ? 0.0 : knots.front()) - 1e3 * span;
  double hi = (knots.empty() ? 0.0 : knots.back()) + 1e3 * span;
  knots.insert(knots.begin(), lo);
  knots.push_back(hi);
  BreakpointSolution s;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    double a = knots[i];
    double b = knots[i + 1];
    double ga = balance(a);
    double gb = balance(b);
    if (ga >= 0.0 && gb <= 0.0) {
      s.lambda = ga == gb ? a : a + (b - a) * ga / (ga - gb);
      break;
    }
  }
  for (double b : p.beta) s.u_generator.push_back(-s.lambda / b);
  for (const OefcLcc& l : p.lccs) s.u_lcc.push_back(std::clamp(-s.lambda * gain(l), l.lower, l.upper));
  return s;
}

}  // namespace midc::test
