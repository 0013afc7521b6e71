#include <doctest.h>

#include <cmath>
#include <random>

#include "midc/error.hpp"
#include "midc/oefc.hpp"
#include "support.hpp"

using namespace midc;

namespace {

Network new_england() { return load_case_file(test::fixture("new_england_midc.cfg")).network; }

OefcProblem random_problem(std::mt19937_64& rng, bool interior) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  OefcProblem p;
  int ng = 1 + static_cast<int>(6 * u(rng));
  int nd = static_cast<int>(6 * u(rng));
  for (int i = 0; i < ng; ++i) p.beta.push_back(0.05 + 0.5 * u(rng));
  for (int i = 0; i < nd; ++i) {
    OefcLcc l;
    if (u(rng) < 0.5) {
      l.weights = {Objective::I, 0.01 + 0.1 * u(rng), 0.2 + 2.0 * u(rng), 0.0, 0.0};
    } else {
      l.weights = {Objective::II, 0.0, 0.0, 5.0 + 50.0 * u(rng), 5.0 + 30.0 * u(rng)};
    }
    l.lower = -(interior ? 50.0 : 0.05 + u(rng));
    l.upper = interior ? 50.0 : 0.05 + u(rng);
    p.lccs.push_back(l);
  }
  p.imbalance = 10.0 * (u(rng) - 0.5);
  return p;
}

}  // namespace

TEST_SUITE("oefc") {
  TEST_CASE("generator cost") {
    CHECK(cost_generator(0.0, 0.3) == 0.0);
    CHECK(cost_generator(1.0, 0.1) == doctest::Approx(0.05));
    CHECK(cost_generator(-1.0, 0.1) == doctest::Approx(0.05));
  }

  TEST_CASE("regulation margin") {
    CHECK(regulation_margin(645, 750, 550, MarginDirection::Increase) == 105);
    CHECK(regulation_margin(645, 750, 550, MarginDirection::Decrease) == 95);
    CHECK(regulation_margin(750, 750, 550, MarginDirection::Increase) == 0);
    Network n = new_england();
    auto w = lcc_cost_weights(n.lccs()[0], Objective::I, MarginDirection::Increase);
    CHECK(w.margin == doctest::Approx(1.05));
    CHECK(lcc_cost_weights(n.lccs()[0], Objective::I, MarginDirection::Decrease).margin == doctest::Approx(0.95));
  }

  TEST_CASE("LCC cost") {
    LccCostWeights one{Objective::I, 0.05, 1.05, 0, 0};
    CHECK(cost_lcc(1.05, one) == doctest::Approx(0.05));
    CHECK(cost_lcc(0.5, one) == doctest::Approx(0.05 * (0.5 / 1.05) * (0.5 / 1.05)));
    CHECK(cost_lcc(0.5, one) == doctest::Approx(0.011338).epsilon(1e-5));
    CHECK(cost_lcc(0.0, LccCostWeights{Objective::II, 0, 0, 30, 25}) == 0.0);
  }

  TEST_CASE("optimal coefficients, objective I") {
    OefcProblem p = make_oefc_problem(new_england(), Objective::I, MarginDirection::Increase);
    OptimalDroop d = optimal_droop(p);
    const double margins[] = {1.05, 1.20, 0.90, 1.00};  // headroom in p.u.
    const double table[] = {11.03, 14.40, 8.10, 10.00};
    REQUIRE(d.lcc.size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(d.lcc[i] == doctest::Approx(margins[i] * margins[i] / 0.1).epsilon(1e-12));
      CHECK(std::abs(d.lcc[i] - table[i]) <= 0.005 + 1e-12);
    }
    const double gen[] = {10, 5, 5, 5, 10, 10, 5};
    for (int i = 0; i < 7; ++i) CHECK(d.generator[i] == doctest::Approx(gen[i]));
  }

  TEST_CASE("optimal coefficients, objective II") {
    OptimalDroop d = optimal_droop(make_oefc_problem(new_england(), Objective::II, MarginDirection::Increase));
    const double kf[] = {25, 30, 20, 25};
    const double table[] = {10.42, 15.00, 6.67, 10.42};
    for (int i = 0; i < 4; ++i) {
      CHECK(d.lcc[i] == doctest::Approx(kf[i] * kf[i] / 60.0).epsilon(1e-12));
      CHECK(std::abs(d.lcc[i] - table[i]) <= 0.005);
    }
  }

  TEST_CASE("average coefficients") {
    Network n = new_england();
    auto one = optimal_droop(make_oefc_problem(n, Objective::I, MarginDirection::Increase));
    auto two = optimal_droop(make_oefc_problem(n, Objective::II, MarginDirection::Increase));
    CHECK(std::abs(average_droop(one.lcc) - 10.88) <= 0.005);
    // 10.625 exactly, displayed half-up
    CHECK(std::abs(average_droop(two.lcc) - 10.63) <= 0.005 + 1e-12);
    std::vector<double> gens{10, 10, 10, 5, 5, 5, 5};
    CHECK(std::abs(average_droop(gens) - 7.14) <= 0.005);
  }

  TEST_CASE("oracle special cases") {
    OefcProblem p = make_oefc_problem(new_england(), Objective::I, MarginDirection::Increase);
    CHECK(std::abs(p.imbalance) < 1e-9);
    p.imbalance = 0.0;
    OefcSolution z = solve_oefc_oracle(p);
    CHECK(z.lambda == 0.0);
    for (double u : z.u_generator) CHECK(u == 0.0);
    for (double u : z.u_lcc) CHECK(u == 0.0);

    OefcProblem single;
    single.beta = {0.1};
    single.imbalance = -1.0;
    OefcSolution s = solve_oefc_oracle(single);
    CHECK(s.u_generator[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.lambda == doctest::Approx(-0.1).epsilon(1e-12));
  }

  TEST_CASE("530 MW deficit with all units in service") {
    OefcProblem p = make_oefc_problem(new_england(), Objective::I, MarginDirection::Increase);
    p.imbalance = -5.3;
    OefcSolution s = solve_oefc_oracle(p);
    OptimalDroop d = optimal_droop(p);
    double total = 0.0;
    for (double k : d.generator) total += k;
    for (double k : d.lcc) total += k;
    CHECK(total == doctest::Approx(50.0 + 43.525));
    CHECK(s.lambda == doctest::Approx(-5.3 / total).epsilon(1e-12));
    CHECK_FALSE(s.any_bound_active());
    for (std::size_t i = 0; i < d.lcc.size(); ++i) CHECK(s.u_lcc[i] == doctest::Approx(-d.lcc[i] * s.lambda).epsilon(1e-12));
    CHECK(std::abs(s.balance_residual) <= 1e-12);
  }

  TEST_CASE("oracle agrees with a breakpoint search") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
      OefcProblem p = random_problem(rng, trial % 2 == 0);
      OefcSolution s = solve_oefc_oracle(p);
      test::BreakpointSolution b = test::breakpoint_oracle(p);
      CHECK(s.lambda == doctest::Approx(b.lambda).epsilon(1e-9).scale(1.0));
      for (std::size_t i = 0; i < p.beta.size(); ++i) CHECK(std::abs(s.u_generator[i] - b.u_generator[i]) < 1e-9);
      for (std::size_t i = 0; i < p.lccs.size(); ++i) CHECK(std::abs(s.u_lcc[i] - b.u_lcc[i]) < 1e-9);
      CHECK(std::abs(s.balance_residual) <= 1e-12);
    }
  }

  TEST_CASE("KKT conditions of the oracle solution") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
      OefcProblem p = random_problem(rng, false);
      OefcSolution s = solve_oefc_oracle(p);
      double sum = p.imbalance;
      for (double u : s.u_generator) sum += u;
      for (double u : s.u_lcc) sum += u;
      CHECK(std::abs(sum) <= 1e-12 * (1.0 + std::abs(p.imbalance)));
      for (std::size_t i = 0; i < p.beta.size(); ++i) CHECK(p.beta[i] * s.u_generator[i] + s.lambda == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
      for (std::size_t i = 0; i < p.lccs.size(); ++i) {
        const OefcLcc& l = p.lccs[i];
        CHECK(s.u_lcc[i] >= l.lower - 1e-15);
        CHECK(s.u_lcc[i] <= l.upper + 1e-15);
        double grad = 2.0 * l.weights.quadratic_weight() * s.u_lcc[i] + s.lambda;
        if (s.u_lcc[i] > l.lower + 1e-12 && s.u_lcc[i] < l.upper - 1e-12) CHECK(std::abs(grad) < 1e-9);
        if (s.u_lcc[i] <= l.lower + 1e-12) CHECK(grad >= -1e-9);
        if (s.u_lcc[i] >= l.upper - 1e-12) CHECK(grad <= 1e-9);
      }
    }
  }

  TEST_CASE("dual function is concave and strongly dual") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    OefcProblem p = make_oefc_problem(new_england(), Objective::I, MarginDirection::Increase);
    p.imbalance = -5.3;
    int bad = 0;
    for (int t = 0; t < 1000; ++t) {
      double a = u(rng);
      double b = u(rng);
      double mu = 0.5 * (1.0 + u(rng));
      double mid = dual_function_value(mu * a + (1 - mu) * b, p);
      double chord = mu * dual_function_value(a, p) + (1 - mu) * dual_function_value(b, p);
      if (mid < chord - 1e-12) ++bad;
    }
    CHECK(bad == 0);
    CHECK(dual_function_value(0.0, OefcProblem{{0.1}, {}, 0.0, {}, {}}) == 0.0);
    OefcSolution s = solve_oefc_oracle(p);
    CHECK(dual_function_value(s.lambda, p) == doctest::Approx(s.cost).epsilon(1e-12));
    CHECK(dual_function_value(s.lambda + 1e-3, p) < s.cost);
    CHECK(dual_function_value(s.lambda - 1e-3, p) < s.cost);
  }

  TEST_CASE("infeasible without generators") {
    OefcProblem p;
    p.lccs.push_back({{Objective::I, 0.05, 1.0, 0, 0}, -0.5, 0.5});
    p.imbalance = -2.0;
    bool thrown = false;
    try {
      solve_oefc_oracle(p);
    } catch (const Error& e) {
      thrown = e.kind() == ErrorKind::Infeasible;
    }
    CHECK(thrown);
  }

  TEST_CASE("objective II needs K^f") {
    Network n = test::three_bus();
    LccParams l = n.lccs()[0];
    l.adjacent_regulation.reset();
    Network bare = build_network(n.buses(), n.lines(), n.generators(), {l});
    ControlConfig c;
    c.objective = Objective::II;
    bool thrown = false;
    try {
      design_coefficients(bare, c);
    } catch (const Error& e) {
      thrown = e.kind() == ErrorKind::MissingParameter;
    }
    CHECK(thrown);
    c.objective = Objective::I;
    CHECK(design_coefficients(bare, c).lcc[0] == doctest::Approx(0.25 / 0.1));
  }

  TEST_CASE("coefficient sources") {
    Network n = new_england();
    ControlConfig c;
    c.droop = DroopSource::Average;
    DroopCoefficients avg = design_coefficients(n, c);
    for (double k : avg.lcc) CHECK(k == doctest::Approx(10.88125));
    for (double k : avg.generator) CHECK(k == doctest::Approx(50.0 / 7.0));
    c.droop = DroopSource::Manual;
    c.manual_lcc = {{"LCC1", 1}, {"LCC2", 2}, {"LCC3", 3}};
    CHECK_THROWS_AS(design_coefficients(n, c), Error);
    c.manual_lcc["LCC4"] = 4;
    CHECK(design_coefficients(n, c).lcc == std::vector<double>{1, 2, 3, 4});
    c.lcc_droop = false;
    c.droop = DroopSource::Optimal;
    for (double k : design_coefficients(n, c).lcc) CHECK(k == 0.0);
  }
}
