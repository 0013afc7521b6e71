#pragma once

// Shared numerical kernels over the line list of a network: power flows,
// Laplacian blocks weighted by B_ij cos(theta_ij), and a Newton solve of the
// lossless flow equations on a subset of buses.

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

#include "midc/grid.hpp"

namespace midc::detail {

/// flow_i = sum_j B_ij sin(theta_i - theta_j).
void bus_flows(const Network& net, std::span<const double> theta, std::span<double> out);

/// Maps bus index -> position in `subset`, or npos.
std::vector<std::size_t> positions(std::size_t n, std::span<const std::size_t> subset);

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// Principal block of the cos-weighted Laplacian on `subset`.
void laplacian_block(const Network& net, std::span<const double> theta, std::span<const std::size_t> subset,
                     std::span<const std::size_t> pos, Eigen::MatrixXd& out);

struct NewtonReport {
  int iterations = 0;
  double residual = 0.0;
};

/// Solves flow_i(theta) = target_i for i in `unknown`, holding the other
/// angles fixed. `theta` carries the initial guess and receives the result.
/// Throws InfeasibleFlow when a bus demands more than its lines can carry,
/// NewtonDivergence when the iteration fails or leaves the security region.
NewtonReport solve_angles(const Network& net, std::span<const std::size_t> unknown,
                          std::span<const double> target, std::span<double> theta, double tol, int max_iter);

/// True when every line satisfies |theta_i - theta_j| < pi/2.
bool inside_security_region(const Network& net, std::span<const double> theta);

}  // namespace midc::detail
