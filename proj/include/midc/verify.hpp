#pragma once

#include <string>
#include <utility>
#include <vector>

#include "midc/dynamics.hpp"
#include "midc/oefc.hpp"
#include "midc/scenario.hpp"

namespace midc {

enum class CheckStatus { Pass, Fail, Skipped };

std::string_view to_string(CheckStatus status);

struct CheckResult {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  std::string detail;
  std::vector<std::pair<std::string, double>> metrics;
};

struct VerifyOptions {
  double steady_tol = 1e-6;        // terminal |omega - omega_syn|
  double optimality_tol = 1e-4;    // per-unit allocation error
  double equivalence_factor = 10;  // times the integration tolerance
  double lyapunov_rel_tol = 1e-8;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool ok() const;
};

/// Cost model whose optimal droop gains are exactly `coefficients`:
/// beta = 1/k^G and LCC weight 1/(2 k^D).
OefcProblem implied_oefc_problem(const Network& network, const DroopCoefficients& coefficients);

/// Terminal frequency of `trajectory` against the droop-aware steady state.
CheckResult check_steady_state(const Trajectory& trajectory, const DroopCoefficients& coefficients, double tol);

/// Terminal allocations of `trajectory` against the oracle. The oracle uses
/// the case's cost parameters when the gains are the optimal ones, the
/// implied costs otherwise. Skipped in the boundary regime.
CheckResult check_optimality(const Scenario& scenario, const Trajectory& trajectory, const DroopCoefficients& coefficients,
                             double tol);

/// Primal-dual flow against the instantaneous, unlimited, dead-zone-free
/// variant of the case, started from the post-event sample.
CheckResult check_pd_equivalence(const Network& network, const Scenario& scenario,
                                 const DroopCoefficients& coefficients, double factor,
                                 const SolverSettings& settings = {});

/// Lyapunov certificate along the post-event part of `trajectory`.
CheckResult check_lyapunov(const Scenario& scenario, const Trajectory& trajectory, const DroopCoefficients& coefficients,
                           double rel_tol);

VerifyReport verify_case(const Case& c, const VerifyOptions& options = {});

struct DroopRun {
  DroopCoefficients coefficients;
  Trajectory trajectory;
  std::vector<double> u_generator;  // terminal, in-service records
  std::vector<double> u_lcc;
  double cost = 0.0;
  double terminal_omega = 0.0;
};

struct CompareReport {
  Objective objective = Objective::I;
  DroopRun optimal;
  DroopRun average;
  bool coefficients_equal = false;
  bool ordering_holds = false;  // cost(optimal) <= cost(average)
};

/// Runs the case with optimal and with class-averaged droop (concurrently)
/// and prices both steady allocations with the chosen objective.
CompareReport compare_droop(const Case& c, Objective objective);

}  // namespace midc
