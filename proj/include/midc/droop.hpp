#pragma once

#include <vector>

namespace midc {

/// k^G = governor gain + damping.
double effective_gen_droop(double governor_droop, double damping);

struct DeadZoneOutput {
  double deviation = 0.0;
  bool latched = false;
};

/// Passes `deviation` through once |deviation| reaches `threshold`, and keeps
/// passing it while latched. Inside the band the output is zero.
DeadZoneOutput apply_dead_zone(double deviation, double threshold, bool latched);

enum class LockState { Unlocked, LockedToRe, LockedToSe };

struct Selection {
  double delta = 0.0;
  LockState lock = LockState::Unlocked;
};

/// Chooses the first channel to produce a nonzero order correction and locks
/// the other one out. Simultaneous activation resolves to the RE channel.
Selection select_and_lock(double re_delta, double se_delta, LockState lock);

struct PowerOrder {
  double value = 0.0;  // p.u., magnitude of the transmitted power
  bool saturated = false;
};

/// P-f droop controller of one LCC link, operating on the magnitude of the
/// transmitted power. Frequency inputs are per-unit deviations from nominal.
struct LccDroopController {
  double k_re = 0.0;
  double k_se = 0.0;
  double nominal = 0.0;  // P_dN
  double lower = 0.0;    // lower bound of the order range
  double upper = 0.0;    // upper bound of the order range
  double dead_zone = 0.0;

  bool re_latched = false;
  bool se_latched = false;
  LockState lock = LockState::Unlocked;

  bool active() const { return re_latched || se_latched; }
  void reset() {
    re_latched = se_latched = false;
    lock = LockState::Unlocked;
  }
};

struct OrderUpdate {
  PowerOrder order;
  LccDroopController next;
};

/// Full sample-time update: dead zone per channel, selection and locking,
/// droop law, clamp to the order range.
OrderUpdate lcc_power_order(const LccDroopController& ctrl, double re_deviation, double se_deviation);

/// Same law with the latch and lock state held fixed; used between controller
/// samples so the order is a continuous function of frequency.
PowerOrder held_power_order(const LccDroopController& ctrl, double re_deviation, double se_deviation);

/// I_ord = P_ord / U_d, MW / kV -> kA.
double current_order(double power_mw, double dc_voltage_kv);

/// Effective droop gains for every generator and LCC record of a network, in
/// record order. Out-of-service units keep their entry.
struct DroopCoefficients {
  std::vector<double> generator;
  std::vector<double> lcc;
};

}  // namespace midc
