#include <doctest.h>

#include <cmath>
#include <numbers>

#include "midc/dynamics.hpp"
#include "midc/oefc.hpp"
#include "midc/stability.hpp"
#include "support.hpp"

using namespace midc;

namespace {

Scenario quiet(double horizon) {
  Scenario s;
  s.name = "quiet";
  s.horizon = horizon;
  return s;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Scenario three_bus_step(double delta, double output) {
  Scenario s = quiet(6.0);
  s.output_interval = output;
  s.events.push_back({1.0, PowerStep{3, delta}});
  return s;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("flat angles and zero injections give a zero residual") {
    Network n = test::two_bus(0.0);
    std::vector<double> theta(2, 0.0);
    auto r = algebraic_residual(n, theta, {});
    REQUIRE(r.size() == 1);
    CHECK(r[0] == 0.0);
  }

  TEST_CASE("two-bus flow equation") {
    Network n = test::two_bus(-1.0);
    const double exact = std::asin(-0.1);
    std::vector<double> at{0.0, exact};
    CHECK(std::abs(algebraic_residual(n, at, {})[0]) < 1e-15);
    std::vector<double> flat{0.0, 0.0};
    CHECK(algebraic_residual(n, flat, {})[0] == -1.0);
    auto solved = solve_algebraic(n, flat, {});
    CHECK(solved[1] == doctest::Approx(exact).epsilon(1e-12));
    CHECK(solved[1] == doctest::Approx(-0.100167).epsilon(1e-6));
  }

  TEST_CASE("bridging passive bus takes the common angle") {
    Network n = build_network({{1, BusRole::Generator, 0}, {2, BusRole::Passive, 0}, {3, BusRole::Generator, 0}},
                              {{1, 2, 10}, {2, 3, 10}}, {{1, 1, 1, 1, 0.1}, {3, 1, 1, 1, 0.1}}, {});
    std::vector<double> theta{0.3, -0.7, 0.3};
    CHECK(solve_algebraic(n, theta, {})[1] == doctest::Approx(0.3).epsilon(1e-12));
  }

  TEST_CASE("demand beyond line capacity") {
    Network n = test::two_bus(-15.0);
    std::vector<double> theta{0.0, 0.0};
    bool thrown = false;
    try {
      solve_algebraic(n, theta, {});
    } catch (const Error& e) {
      thrown = e.kind() == ErrorKind::InfeasibleFlow;
    }
    CHECK(thrown);
  }

  TEST_CASE("rigid rotation of the algebraic buses") {
    Case c = load_case_file(test::fixture("g6_trip.cfg"));
    DroopCoefficients k = design_coefficients(c.network, c.scenario.control);
    Equilibrium eq = steady_state(c.network, k);
    std::vector<double> omega(c.network.bus_count(), 0.0);
    for (const auto& g : c.network.generators()) omega[c.network.index_of(g.bus)] = 0.0123;
    std::vector<double> rate(c.network.lccs().size(), 0.0);
    for (double w : algebraic_bus_frequencies(c.network, eq.theta, omega, rate)) CHECK(w == doctest::Approx(0.0123).epsilon(1e-12));
  }

  TEST_CASE("equilibrium is a fixed point of the step") {
    Case c = load_case_file(test::fixture("g6_trip.cfg"));
    ClosedLoopModel m(c.network, design_coefficients(c.network, c.scenario.control));
    SystemState s0 = initial_state(m, 0.0);
    SystemState s = s0;
    for (int i = 0; i < 200; ++i) s = step(m, s, 1e-3);
    CHECK(max_abs_diff(s.theta, s0.theta) < 1e-10);
    CHECK(max_abs_diff(s.omega, s0.omega) < 1e-12);
    CHECK(max_abs_diff(s.pdc, s0.pdc) < 1e-12);
  }

  TEST_CASE("no events keeps the initial equilibrium") {
    Case c = load_case_file(test::fixture("g6_trip.cfg"));
    Trajectory t = simulate(c.network, quiet(2.0), design_coefficients(c.network, c.scenario.control));
    REQUIRE_FALSE(t.failed);
    REQUIRE(t.samples.size() == 201);
    double drift = 0.0;
    for (const Sample& s : t.samples) drift = std::max(drift, max_abs_diff(s.omega, t.samples.front().omega));
    CHECK(drift < 1e-12);
  }

  TEST_CASE("single generator relaxes with time constant M/k") {
    Network n = build_network({{1, BusRole::Generator, 0.0}}, {}, {{1, 10.0, 1.0, 9.0, 0.1}}, {});
    Scenario s = quiet(5.0);
    s.events.push_back({0.0, PowerStep{1, -1.0}});
    Trajectory t = simulate(n, s, {{10.0}, {}});
    REQUIRE_FALSE(t.failed);
    double worst = 0.0;
    for (const Sample& x : t.samples) worst = std::max(worst, std::abs(x.omega[0] - (-0.1 * (1.0 - std::exp(-x.time)))));
    CHECK(worst < 1e-12);
  }

  TEST_CASE("lagged LCC order relaxes exponentially at fixed frequency") {
    LccParams l;
    l.name = "L";
    l.bus = 2;
    l.nominal = 5.0;
    l.upper = 10.0;
    l.lower = 1.0;
    l.time_constant = 0.1;
    l.alpha = 0.05;
    // Huge inertia pins the generator frequency, a stiff line pins the LCC bus to it.
    Network n = build_network({{1, BusRole::Generator, -5.0}, {2, BusRole::LccConnected, 0.0}}, {{1, 2, 1e8}},
                              {{1, 1e12, 1.0, 9.0, 0.1}}, {l});
    ClosedLoopModel m(n, {{10.0}, {10.0}});
    SystemState s = initial_state(m, 0.0);
    REQUIRE(s.controllers[0].active());
    s.omega[0] = -0.01;
    m.complete(s);
    double worst = 0.0;
    for (int i = 1; i <= 1000; ++i) {
      s = step(m, s, 1e-3);
      worst = std::max(worst, std::abs(s.pdc[0] - (5.0 + 0.1 * (1.0 - std::exp(-s.time / 0.1)))));
    }
    CHECK(worst < 1e-7);
    CHECK(s.pdc[0] == doctest::Approx(5.1).epsilon(1e-6));
  }

  TEST_CASE("LCC bus frequency matches the angle derivative") {
    // central differences at two spacings, error has to drop by ~4
    Network n = test::three_bus();
    DroopCoefficients k{{10.0}, {2.5}};
    auto fd_error = [&](double h) {
      Trajectory t = simulate(n, three_bus_step(-1.0, h), k);
      REQUIRE_FALSE(t.failed);
      double worst = 0.0;
      for (std::size_t i = 1; i + 1 < t.samples.size(); ++i) {
        double time = t.samples[i].time;
        if (time < 1.05 || time > 3.0) continue;
        double fd = (t.samples[i + 1].theta[1] - t.samples[i - 1].theta[1]) / (2.0 * h);
        // angles live in the frame of the reference bus
        worst = std::max(worst, std::abs(fd - (t.samples[i].omega[1] - t.samples[i].omega[0])));
      }
      return worst;
    };
    double coarse = fd_error(0.02);
    double fine = fd_error(0.01);
    CHECK(coarse < 1e-3);
    CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.15));
  }

  TEST_CASE("sample grid and event placement") {
    Trajectory t = simulate(test::three_bus(), three_bus_step(-1.0, 0.01), {{10.0}, {2.5}});
    REQUIRE_FALSE(t.failed);
    for (std::size_t i = 1; i < t.samples.size(); ++i) {
      CHECK(t.samples[i].time - t.samples[i - 1].time == doctest::Approx(0.01).epsilon(1e-9));
    }
    REQUIRE(t.events.size() == 1);
    const Sample& at = t.samples[t.events[0].sample_index];
    CHECK(at.time == doctest::Approx(1.0));
    // post-event: the load step is already in the algebraic solution
    CHECK(at.theta[2] < t.samples[t.events[0].sample_index - 1].theta[2] - 0.05);
  }

  TEST_CASE("steady state matches the closed form") {
    Network n = test::three_bus().with_power_step(3, -1.0);
    DroopCoefficients k{{10.0}, {2.5}};
    Equilibrium eq = steady_state(n, k);
    CHECK(eq.omega_syn == doctest::Approx(-1.0 / 12.5).epsilon(1e-14));
    CHECK(std::abs(eq.balance_residual) <= 1e-12);
    CHECK(eq.u_generator[0] == doctest::Approx(0.8));
    CHECK(eq.u_lcc[0] == doctest::Approx(0.2));
    CHECK_FALSE(eq.saturated[0]);
  }

  TEST_CASE("saturated link holds its bound at steady state") {
    Network n = test::three_bus().with_power_step(3, -3.0);
    DroopCoefficients k{{10.0}, {20.0}};
    Equilibrium eq = steady_state(n, k);
    CHECK(eq.saturated[0]);
    CHECK(eq.pdc[0] == doctest::Approx(1.5));
    CHECK(eq.omega_syn == doctest::Approx(-2.5 / 10.0));
  }

  TEST_CASE("mid-run flow infeasibility ends the trajectory") {
    Trajectory t = simulate(test::three_bus(), three_bus_step(-25.0, 0.01), {{10.0}, {2.5}});
    CHECK(t.failed);
    CHECK(t.failure_kind == ErrorKind::InfeasibleFlow);
    REQUIRE_FALSE(t.samples.empty());
    CHECK(t.samples.back().time < 1.0 + 1e-9);
  }

  TEST_CASE("instantaneous links cannot carry a dead zone") {
    Scenario s = three_bus_step(-1.0, 0.01);
    s.control.dead_zone = 0.004;
    bool thrown = false;
    try {
      simulate(test::three_bus(0.0), s, {{10.0}, {2.5}});
    } catch (const Error& e) {
      thrown = e.kind() == ErrorKind::UnsupportedRegime;
    }
    CHECK(thrown);
  }
}
