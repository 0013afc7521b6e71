#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "midc/droop.hpp"
#include "midc/error.hpp"
#include "midc/grid.hpp"
#include "midc/scenario.hpp"

namespace midc {

struct SolverSettings {
  double newton_tol = 1e-10;
  int newton_max_iter = 50;
};

/// Consistent snapshot of the closed-loop system.
///
/// `theta` and `omega` cover every bus; only generator-bus frequencies are
/// states, the others are derived by index reduction. `pdc` is indexed by LCC
/// record and is zero for blocked links.
struct SystemState {
  double time = 0.0;
  std::vector<double> theta;
  std::vector<double> omega;
  std::vector<double> pdc;
  std::vector<LccDroopController> controllers;
};

/// residual_i = P_i (+ p_i^dc) - sum_j B_ij sin(theta_i - theta_j) over the
/// LCC and passive buses, in bus order. `pdc` is indexed by LCC record.
std::vector<double> algebraic_residual(const Network& network, std::span<const double> theta,
                                       std::span<const double> pdc);

/// Bus indices of the LCC and passive buses, in bus order.
std::vector<std::size_t> algebraic_buses(const Network& network);

/// Newton solve for the LCC / passive angles with generator angles held at
/// their values in `theta`. Returns the full angle vector.
std::vector<double> solve_algebraic(const Network& network, std::span<const double> theta,
                                    std::span<const double> pdc, const SolverSettings& settings = {});

/// Frequencies at the algebraic buses from the time derivative of the flow
/// constraints, given generator frequencies (entries of `omega` at generator
/// buses) and the DC power rates. Returns a full per-bus frequency vector.
std::vector<double> algebraic_bus_frequencies(const Network& network, std::span<const double> theta,
                                              std::span<const double> omega, std::span<const double> pdc_rate);

/// The closed-loop DAE of one network configuration with fixed droop gains.
///
/// Differential states are packed as [theta_G, omega_G, p (lagged LCCs),
/// theta (instantaneous LCCs)]. An LCC with zero time constant is treated in
/// the instantaneous limit, where its bus angle becomes a differential state.
class ClosedLoopModel {
 public:
  ClosedLoopModel(Network network, DroopCoefficients coefficients, SolverSettings settings = {});

  const Network& network() const { return network_; }
  const DroopCoefficients& coefficients() const { return coefficients_; }
  const SolverSettings& settings() const { return settings_; }
  std::size_t state_size() const { return size_; }

  Eigen::VectorXd pack(const SystemState& state) const;

  /// Derivative of the packed state. `scratch` supplies the warm start for the
  /// algebraic angles and the latch states; on return it holds the complete
  /// consistent state at `x` (angles, all frequencies, DC powers).
  Eigen::VectorXd derivative(const Eigen::VectorXd& x, SystemState& scratch) const;

  /// Re-solves the algebraic part of `state` from its differential part.
  Eigen::VectorXd complete(SystemState& state) const;

  /// Delivered DC power of a link under the held controller law at bus
  /// frequency `omega`.
  double power_order(std::size_t lcc, const LccDroopController& ctrl, double omega) const;

  /// Controller seeded for this network and gains, with the given activation.
  LccDroopController make_controller(std::size_t lcc, double dead_zone, bool active) const;

 private:
  void solve_frequencies(SystemState& s, Eigen::VectorXd& pdot) const;

  Network network_;
  DroopCoefficients coefficients_;
  SolverSettings settings_;

  std::vector<std::size_t> gens_;     // generator bus indices
  std::vector<std::size_t> gen_rec_;  // generator record per entry of gens_
  std::vector<std::size_t> lagged_;   // LCC records with T > 0
  std::vector<std::size_t> instant_;  // LCC records with T = 0
  std::vector<std::size_t> algebraic_;
  std::size_t size_ = 0;
};

/// Advances the state by one RK4 step with the controller latches frozen,
/// re-solves the algebraic part, then samples the controllers.
SystemState step(const ClosedLoopModel& model, const SystemState& state, double dt);

/// Samples every in-service controller at the current bus frequencies.
/// Returns true when any latch or lock changed.
bool sample_controllers(const ClosedLoopModel& model, SystemState& state);

struct Equilibrium {
  std::vector<double> theta;
  double omega_syn = 0.0;
  std::vector<double> pdc;          // per LCC record
  std::vector<double> u_generator;  // per generator record
  std::vector<double> u_lcc;        // per LCC record
  std::vector<bool> saturated;      // per LCC record
  double balance_residual = 0.0;
};

/// Droop-aware steady state. `lcc_active` (per LCC record, default all true)
/// marks controllers whose droop is engaged; inactive ones hold P^D.
Equilibrium steady_state(const Network& network, const DroopCoefficients& coefficients,
                         std::span<const bool> lcc_active = {}, const SolverSettings& settings = {});

/// Pre-event operating point: equilibrium with LCC droop disengaged, or with
/// it engaged when the resulting frequency already lies outside the dead zone.
SystemState initial_state(const ClosedLoopModel& model, double dead_zone);

struct Sample {
  double time = 0.0;
  std::vector<double> theta;      // per bus
  std::vector<double> omega;      // per bus
  std::vector<double> pdc;        // per LCC record
  std::vector<bool> saturated;    // per LCC record
  std::vector<bool> droop_active; // per LCC record
  std::vector<double> u_generator;  // per generator record, -k^G omega
  std::vector<double> u_lcc;        // per LCC record, p^dc - P^D
  std::vector<double> edge_flow;  // per line, P_ij = -B_ij sin(theta_i - theta_j)
};

struct EventMarker {
  double time = 0.0;
  std::string description;
  std::size_t sample_index = 0;
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<EventMarker> events;
  bool failed = false;
  ErrorKind failure_kind = ErrorKind::NewtonDivergence;
  std::string failure;
  double output_interval = 0.0;
  std::optional<Network> final_network;
  DroopCoefficients coefficients;
};

/// Integrates the scenario with explicit droop gains. Solver failures during
/// the run end the trajectory early and are recorded on it.
Trajectory simulate(const Network& network, const Scenario& scenario, const DroopCoefficients& coefficients,
                    const SolverSettings& settings = {});

/// Same, with the gains designed from the scenario's control configuration.
Trajectory simulate(const Network& network, const Scenario& scenario);

Sample make_sample(const ClosedLoopModel& model, const SystemState& state);

Network apply_event(const Network& network, const EventAction& action);

}  // namespace midc
