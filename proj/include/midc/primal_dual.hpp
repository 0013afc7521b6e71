#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "midc/droop.hpp"
#include "midc/dynamics.hpp"
#include "midc/grid.hpp"

namespace midc {

/// Distributed form of the allocation problem on the network graph.
/// Generator records carry beta and the stepsize tau; LCC records carry the
/// droop gain k = 1 / (2 w) and their regulation box.
struct PdProblem {
  Network network;
  std::vector<double> beta;       // per generator record
  std::vector<double> tau;        // per generator record
  std::vector<double> lcc_gain;   // per LCC record
  std::vector<double> lcc_lower;  // per LCC record, box on u
  std::vector<double> lcc_upper;
};

/// beta = 1/k^G, tau = 1/M, LCC gains and boxes from `coefficients`.
PdProblem make_pd_problem(const Network& network, const DroopCoefficients& coefficients);

enum class GammaMode {
  Frozen,          // gamma_ij held at the stored values
  AngleDependent,  // gamma_ij = B_ij cos(phi_i - phi_j), phi integrated from lambda
};

/// Iterate of the primal-dual flow. `nu` holds one multiplier per line for the
/// orientation from -> to; the reverse orientation is its negative.
struct PdState {
  double time = 0.0;
  std::vector<double> lambda;  // per bus
  std::vector<double> nu;      // per line
  std::vector<double> gamma;   // per line, used in Frozen mode
  std::vector<double> phi;     // per bus, used in AngleDependent mode
  GammaMode mode = GammaMode::Frozen;
};

/// nu_ij for the oriented pair (i, j) of bus indices joined by `line`.
double oriented_nu(const PdState& state, const Network& network, std::size_t line, std::size_t i);

/// Current gamma_ij of every line.
std::vector<double> edge_stepsizes(const PdState& state, const Network& network);

/// Frozen-mode start: lambda = 0, gamma_ij = B_ij, and nu chosen so every
/// LCC and passive bus balances with zero regulation.
PdState consistent_pd_start(const PdProblem& problem);

/// Fills lambda at LCC and passive buses from the algebraic conditions.
void solve_pd_algebraic(const PdProblem& problem, PdState& state);

/// Time derivative of [lambda_G, nu, phi?] at a state whose algebraic lambda
/// are consistent.
Eigen::VectorXd pd_derivative(const PdProblem& problem, const PdState& state);

/// One RK4 step of size h, algebraic lambda re-solved at every stage.
PdState pd_step(const PdState& state, const PdProblem& problem, double h);

struct PdResult {
  PdState state;
  double lambda_star = 0.0;  // mean over buses at termination
  double consensus_gap = 0.0;  // max |lambda_i - lambda_j| over lines
  double time = 0.0;
  long steps = 0;
};

/// Integrates until max |lambda_dot_G| and max |nu_dot| fall to `tol`.
/// Throws NoConvergence when `max_time` is reached first.
PdResult run_pd(const PdProblem& problem, PdState init, double tol, double max_time, double h = 1e-3);

/// Dynamics sample viewed as a primal-dual iterate: lambda = omega,
/// nu_ij = -B_ij sin(theta_i - theta_j), phi = theta, gamma_ij = B_ij cos(theta_ij).
PdState map_dynamics_to_pd(const Sample& sample, const Network& network);

}  // namespace midc
