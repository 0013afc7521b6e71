#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "midc/droop.hpp"
#include "midc/dynamics.hpp"
#include "midc/grid.hpp"

namespace midc {

struct SecurityCheck {
  bool secure = true;
  double margin = 0.0;  // min over lines of pi/2 - |theta_ij|
  std::size_t worst_line = 0;
};

SecurityCheck check_security(std::span<const double> theta, const Network& network);

/// Laplacian weighted by B_ij cos(theta_i - theta_j).
Eigen::MatrixXd hessian_fc(std::span<const double> theta, const Network& network);

struct HessianReport {
  double smallest = 0.0;
  double second_smallest = 0.0;
  double largest = 0.0;
  double max_row_sum = 0.0;
  double asymmetry = 0.0;
  bool kernel_is_ones = false;
  bool psd_one_dim_kernel = false;
  bool principal_minors_pd = false;

  bool passed() const { return psd_one_dim_kernel && principal_minors_pd; }
};

HessianReport analyze_hessian(std::span<const double> theta, const Network& network);

/// Weights and reference point of V = V1 + V2.
struct LyapunovConfig {
  std::vector<double> d;  // per LCC record
  Equilibrium reference;
};

/// d_i = scale / k_i^D for every LCC record with a positive gain.
LyapunovConfig make_lyapunov_config(const Network& network, const DroopCoefficients& coefficients,
                                    const Equilibrium& reference, double scale = 1.0);

struct LyapunovValue {
  double v = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
};

LyapunovValue lyapunov_value(const Sample& state, const LyapunovConfig& config, const Network& network);

/// Inertia and d T blocks of the Lyapunov Hessian are positive.
bool lyapunov_diagonal_blocks_positive(const LyapunovConfig& config, const Network& network);

struct LyapunovPoint {
  double time = 0.0;
  double v = 0.0;
  double v_dot = 0.0;  // central difference; zero at the ends
};

struct LyapunovReport {
  std::vector<LyapunovPoint> series;
  std::vector<std::size_t> violations;  // indices into series
  double max_v = 0.0;
  double max_v_dot = 0.0;   // largest estimate over interior points
  double threshold = 0.0;   // max(relative tolerance * max_v, 1e-16)
  double min_v = 0.0;
  double terminal_v = 0.0;
};

/// V and its numerical derivative over samples [first, end) of `trajectory`,
/// which must all belong to `network`.
LyapunovReport lyapunov_decrease_report(const Trajectory& trajectory, std::size_t first, const LyapunovConfig& config,
                                        const Network& network, double relative_tol = 1e-8);

/// (sum P_i + sum P_i^D) / (sum k^G + sum k^D) over in-service units.
double synchronous_frequency(const Network& network, const DroopCoefficients& coefficients);

}  // namespace midc
