#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "midc/droop.hpp"
#include "midc/grid.hpp"
#include "midc/scenario.hpp"

namespace midc {

/// C^G(u) = 1/2 beta u^2.
double cost_generator(double u, double beta);

/// Z^D: headroom above (Increase) or below (Decrease) the nominal transmitted
/// power. All three powers are magnitudes.
double regulation_margin(double nominal, double upper, double lower, MarginDirection direction);

/// Quadratic cost of one LCC's regulation under either objective:
/// objective I uses alpha (u/Z)^2, objective II uses e (u/K^f)^2.
struct LccCostWeights {
  Objective objective = Objective::I;
  double alpha = 0.0;
  double margin = 0.0;  // Z^D
  double e = 0.0;
  double kf = 0.0;

  double quadratic_weight() const;
};

double cost_lcc(double u, const LccCostWeights& weights);

struct OefcLcc {
  LccCostWeights weights;
  double lower = 0.0;  // regulation box, p.u. change of delivered power
  double upper = 0.0;
};

/// Allocation of the imbalance b among generators (unbounded) and LCC links
/// (boxed) at least total quadratic cost, subject to sum(u) + b = 0.
struct OefcProblem {
  std::vector<double> beta;
  std::vector<OefcLcc> lccs;
  double imbalance = 0.0;

  // Network record each entry came from, when built from a network.
  std::vector<std::size_t> generator_records;
  std::vector<std::size_t> lcc_records;

  void validate() const;
};

/// Builds the problem for the in-service units of `network`; the imbalance is
/// sum(P_i) + sum(P_i^D).
OefcProblem make_oefc_problem(const Network& network, Objective objective, MarginDirection margin);

LccCostWeights lcc_cost_weights(const LccParams& lcc, Objective objective, MarginDirection margin);

struct OptimalDroop {
  std::vector<double> generator;  // 1 / beta
  std::vector<double> lcc;        // Z^2 / (2 alpha)  or  (K^f)^2 / (2 e)
};

OptimalDroop optimal_droop(const OefcProblem& problem);

double average_droop(std::span<const double> coefficients);

struct OefcSolution {
  std::vector<double> u_generator;
  std::vector<double> u_lcc;
  double lambda = 0.0;
  double cost = 0.0;
  double balance_residual = 0.0;
  std::vector<bool> at_lower;
  std::vector<bool> at_upper;
  int iterations = 0;

  bool any_bound_active() const;
};

/// KKT solve by bisection on the balance multiplier, followed by an exact
/// solve on the identified active set.
OefcSolution solve_oefc_oracle(const OefcProblem& problem, double tol = 1e-12);

double total_cost(const OefcProblem& problem, std::span<const double> u_generator, std::span<const double> u_lcc);

/// Lagrangian dual function with the box-projected minimisers substituted.
double dual_function_value(double lambda, const OefcProblem& problem);

/// Droop gains for every generator / LCC record of `network` according to the
/// scenario's control configuration.
DroopCoefficients design_coefficients(const Network& network, const ControlConfig& control);

}  // namespace midc
