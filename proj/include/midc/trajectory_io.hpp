#pragma once

#include <optional>
#include <ostream>
#include <vector>

#include "midc/dynamics.hpp"
#include "midc/grid.hpp"

namespace midc {

/// Inertia-weighted mean frequency deviation of the in-service generators of
/// `network`, p.u.
double system_frequency(const Sample& sample, const Network& network);

struct TrajectorySummary {
  double terminal_omega = 0.0;  // p.u. deviation
  double terminal_hz = 0.0;
  double nadir_omega = 0.0;     // largest |deviation|, signed
  // Time from the last event until the system frequency stays within the
  // band around its terminal value; empty if it never settles.
  std::optional<double> settling_time;
  std::vector<double> u_generator;
  std::vector<double> u_lcc;
};

TrajectorySummary summarize(const Trajectory& trajectory, const Network& network, double band_hz = 0.02);

/// One row per sample: time_s, per bus omega_pu/theta_rad, per LCC pdc_pu and
/// saturation flag, per generator u_G. Column names use external bus ids and
/// LCC names.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, const Network& network);

}  // namespace midc
