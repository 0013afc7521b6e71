#include "midc/droop.hpp"

#include <algorithm>
#include <cmath>

#include "midc/error.hpp"

namespace midc {

double effective_gen_droop(double governor_droop, double damping) { return governor_droop + damping; }

DeadZoneOutput apply_dead_zone(double deviation, double threshold, bool latched) {
  if (latched || std::abs(deviation) >= threshold) return {deviation, true};
  return {0.0, false};
}

Selection select_and_lock(double re_delta, double se_delta, LockState lock) {
  switch (lock) {
    case LockState::LockedToRe: return {re_delta, lock};
    case LockState::LockedToSe: return {se_delta, lock};
    case LockState::Unlocked: break;
  }
  if (re_delta != 0.0) return {re_delta, LockState::LockedToRe};
  if (se_delta != 0.0) return {se_delta, LockState::LockedToSe};
  return {0.0, LockState::Unlocked};
}

namespace {

PowerOrder clamp_order(const LccDroopController& ctrl, double raw) {
  double v = std::clamp(raw, ctrl.lower, ctrl.upper);
  return {v, v != raw};
}

}  // namespace

OrderUpdate lcc_power_order(const LccDroopController& ctrl, double re_deviation, double se_deviation) {
  LccDroopController next = ctrl;
  DeadZoneOutput re = apply_dead_zone(re_deviation, ctrl.dead_zone, ctrl.re_latched);
  DeadZoneOutput se = apply_dead_zone(se_deviation, ctrl.dead_zone, ctrl.se_latched);
  next.re_latched = re.latched;
  next.se_latched = se.latched;

  // RE: P_ord = P_dN - k_re * dw_re ; SE: P_ord = P_dN + k_se * dw_se
  Selection sel = select_and_lock(-ctrl.k_re * re.deviation, ctrl.k_se * se.deviation, ctrl.lock);
  next.lock = sel.lock;
  return {clamp_order(ctrl, ctrl.nominal + sel.delta), next};
}

PowerOrder held_power_order(const LccDroopController& ctrl, double re_deviation, double se_deviation) {
  double re = ctrl.re_latched ? re_deviation : 0.0;
  double se = ctrl.se_latched ? se_deviation : 0.0;
  Selection sel = select_and_lock(-ctrl.k_re * re, ctrl.k_se * se, ctrl.lock);
  return clamp_order(ctrl, ctrl.nominal + sel.delta);
}

double current_order(double power_mw, double dc_voltage_kv) {
  if (dc_voltage_kv == 0.0) fail(ErrorKind::ZeroDcVoltage, "current order needs a nonzero DC voltage");
  return power_mw / dc_voltage_kv;
}

}  // namespace midc
