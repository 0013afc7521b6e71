#include "midc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <type_traits>
#include <utility>

#include "midc/oefc.hpp"
#include "network_math.hpp"

namespace midc {

using detail::npos;

std::vector<std::size_t> algebraic_buses(const Network& network) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < network.bus_count(); ++i) {
    if (network.bus(i).role != BusRole::Generator) out.push_back(i);
  }
  return out;
}

namespace {

double lcc_injection(const Network& net, std::size_t bus, std::span<const double> pdc) {
  auto c = net.lcc_at(bus);
  return c ? pdc[*c] : 0.0;
}

}  // namespace

std::vector<double> algebraic_residual(const Network& network, std::span<const double> theta,
                                       std::span<const double> pdc) {
  std::vector<double> flow(network.bus_count());
  detail::bus_flows(network, theta, flow);
  std::vector<double> r;
  for (std::size_t i : algebraic_buses(network)) {
    r.push_back(network.bus(i).injection + lcc_injection(network, i, pdc) - flow[i]);
  }
  return r;
}

std::vector<double> solve_algebraic(const Network& network, std::span<const double> theta,
                                    std::span<const double> pdc, const SolverSettings& settings) {
  std::vector<double> out(theta.begin(), theta.end());
  std::vector<std::size_t> alg = algebraic_buses(network);
  std::vector<double> target;
  for (std::size_t i : alg) target.push_back(network.bus(i).injection + lcc_injection(network, i, pdc));
  detail::solve_angles(network, alg, target, out, settings.newton_tol, settings.newton_max_iter);
  return out;
}

std::vector<double> algebraic_bus_frequencies(const Network& network, std::span<const double> theta,
                                              std::span<const double> omega, std::span<const double> pdc_rate) {
  std::vector<double> out(omega.begin(), omega.end());
  std::vector<std::size_t> alg = algebraic_buses(network);
  if (alg.empty()) return out;
  std::vector<std::size_t> pos = detail::positions(network.bus_count(), alg);

  // d/dt of P_i + p_i - sum_j B_ij sin(theta_ij) = 0:
  // sum_j w_ij (omega_i - omega_j) = pdot_i, w_ij = B_ij cos(theta_ij)
  Eigen::MatrixXd l;
  detail::laplacian_block(network, theta, alg, pos, l);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(alg.size()));
  for (std::size_t k = 0; k < alg.size(); ++k) {
    std::size_t i = alg[k];
    rhs[static_cast<Eigen::Index>(k)] += lcc_injection(network, i, pdc_rate);
    for (const Incidence& inc : network.incident(i)) {
      if (pos[inc.neighbor] != npos) continue;
      double w = network.line_susceptance(inc.line) * std::cos(theta[i] - theta[inc.neighbor]);
      rhs[static_cast<Eigen::Index>(k)] += w * omega[inc.neighbor];
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(l);
  if (llt.info() != Eigen::Success) fail(ErrorKind::SingularJacobian, "algebraic frequency system is singular");
  Eigen::VectorXd w = llt.solve(rhs);
  for (std::size_t k = 0; k < alg.size(); ++k) out[alg[k]] = w[static_cast<Eigen::Index>(k)];
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct OrderEval {
  double value = 0.0;  // signed delivered power
  double slope = 0.0;  // d value / d omega
  bool saturated = false;
};

OrderEval eval_order(const LccParams& lcc, const LccDroopController& ctrl, double omega) {
  bool receiving = lcc.direction() > 0.0;
  double re = receiving ? omega : 0.0;
  double se = receiving ? 0.0 : omega;
  PowerOrder po = held_power_order(ctrl, re, se);
  OrderEval out;
  out.value = lcc.direction() * po.value;
  out.saturated = po.saturated;
  bool engaged = receiving ? ctrl.re_latched && ctrl.lock != LockState::LockedToSe
                           : ctrl.se_latched && ctrl.lock != LockState::LockedToRe;
  // both channels give d(signed order)/d omega = -k
  if (engaged && !po.saturated) out.slope = -(receiving ? ctrl.k_re : ctrl.k_se);
  return out;
}

}  // namespace

ClosedLoopModel::ClosedLoopModel(Network network, DroopCoefficients coefficients, SolverSettings settings)
    : network_(std::move(network)), coefficients_(std::move(coefficients)), settings_(settings) {
  if (coefficients_.generator.size() != network_.generators().size() ||
      coefficients_.lcc.size() != network_.lccs().size()) {
    fail(ErrorKind::InvalidParameter, "droop coefficient count does not match the network");
  }
  for (std::size_t i = 0; i < network_.bus_count(); ++i) {
    if (network_.bus(i).role == BusRole::Generator) {
      gens_.push_back(i);
      gen_rec_.push_back(*network_.generator_at(i));
    }
  }
  for (std::size_t c = 0; c < network_.lccs().size(); ++c) {
    const LccParams& l = network_.lccs()[c];
    if (!l.in_service) continue;
    if (l.time_constant > 0.0) {
      lagged_.push_back(c);
    } else {
      if (!(coefficients_.lcc[c] > 0.0)) {
        fail(ErrorKind::UnsupportedRegime, "instantaneous LCC " + l.name + " needs a positive droop gain");
      }
      instant_.push_back(c);
    }
  }
  for (std::size_t i = 0; i < network_.bus_count(); ++i) {
    BusRole r = network_.bus(i).role;
    if (r == BusRole::Passive) algebraic_.push_back(i);
    if (r == BusRole::LccConnected && network_.lccs()[*network_.lcc_at(i)].time_constant > 0.0) {
      algebraic_.push_back(i);
    }
  }
  size_ = 2 * gens_.size() + lagged_.size() + instant_.size();
}

double ClosedLoopModel::power_order(std::size_t lcc, const LccDroopController& ctrl, double omega) const {
  return eval_order(network_.lccs()[lcc], ctrl, omega).value;
}

LccDroopController ClosedLoopModel::make_controller(std::size_t lcc, double dead_zone, bool active) const {
  const LccParams& l = network_.lccs()[lcc];
  LccDroopController c;
  c.k_re = c.k_se = coefficients_.lcc[lcc];
  c.nominal = std::abs(l.nominal);
  c.lower = l.lower;
  c.upper = l.upper;
  c.dead_zone = dead_zone;
  if (active) {
    c.re_latched = c.se_latched = true;
  }
  return c;
}

Eigen::VectorXd ClosedLoopModel::pack(const SystemState& s) const {
  Eigen::VectorXd x(static_cast<Eigen::Index>(size_));
  Eigen::Index k = 0;
  for (std::size_t b : gens_) x[k++] = s.theta[b];
  for (std::size_t b : gens_) x[k++] = s.omega[b];
  for (std::size_t c : lagged_) x[k++] = s.pdc[c];
  for (std::size_t c : instant_) x[k++] = s.theta[network_.index_of(network_.lccs()[c].bus)];
  return x;
}

void ClosedLoopModel::solve_frequencies(SystemState& s, Eigen::VectorXd& pdot) const {
  const std::size_t m = algebraic_.size();
  pdot.setZero(static_cast<Eigen::Index>(lagged_.size()));
  if (m == 0) return;

  const std::size_t n = network_.bus_count();
  std::vector<std::size_t> pos = detail::positions(n, algebraic_);
  std::vector<std::size_t> lag_pos(m, npos);  // position in lagged_ per algebraic entry
  for (std::size_t k = 0; k < lagged_.size(); ++k) {
    lag_pos[pos[network_.index_of(network_.lccs()[lagged_[k]].bus)]] = k;
  }

  Eigen::MatrixXd l;
  detail::laplacian_block(network_, s.theta, algebraic_, pos, l);
  const auto mm = static_cast<Eigen::Index>(m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mm);
  Eigen::VectorXd w(mm);
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t i = algebraic_[k];
    w[static_cast<Eigen::Index>(k)] = s.omega[i];
    for (const Incidence& inc : network_.incident(i)) {
      if (pos[inc.neighbor] != npos) continue;
      double wt = network_.line_susceptance(inc.line) * std::cos(s.theta[i] - s.theta[inc.neighbor]);
      rhs[static_cast<Eigen::Index>(k)] += wt * s.omega[inc.neighbor];
    }
  }

  // L w - rhs = pdot(w), pdot piecewise linear in the local frequency;
  // semismooth Newton settles the controller regime in a few passes.
  std::vector<OrderEval> order(lagged_.size());
  Eigen::VectorXd r(mm);
  Eigen::MatrixXd j;
  double rnorm = 0.0;
  for (int it = 0; it < 30; ++it) {
    r = l * w - rhs;
    j = l;
    for (std::size_t k = 0; k < m; ++k) {
      std::size_t q = lag_pos[k];
      if (q == npos) continue;
      std::size_t c = lagged_[q];
      const LccParams& lp = network_.lccs()[c];
      order[q] = eval_order(lp, s.controllers[c], w[static_cast<Eigen::Index>(k)]);
      double t = lp.time_constant;
      pdot[static_cast<Eigen::Index>(q)] = (order[q].value - s.pdc[c]) / t;
      r[static_cast<Eigen::Index>(k)] -= pdot[static_cast<Eigen::Index>(q)];
      j(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) -= order[q].slope / t;
    }
    double scale = 1.0 + rhs.cwiseAbs().maxCoeff() + (pdot.size() ? pdot.cwiseAbs().maxCoeff() : 0.0);
    rnorm = r.cwiseAbs().maxCoeff();
    if (rnorm <= 1e-13 * scale) break;
    Eigen::LLT<Eigen::MatrixXd> llt(j);
    if (llt.info() != Eigen::Success) fail(ErrorKind::SingularJacobian, "algebraic frequency system is singular");
    w -= llt.solve(r);
    if (it == 29) fail(ErrorKind::SingularJacobian, "algebraic frequency iteration did not settle");
  }
  for (std::size_t k = 0; k < m; ++k) s.omega[algebraic_[k]] = w[static_cast<Eigen::Index>(k)];
}

Eigen::VectorXd ClosedLoopModel::derivative(const Eigen::VectorXd& x, SystemState& s) const {
  const std::size_t n = network_.bus_count();
  const std::size_t ng = gens_.size();
  s.theta.resize(n, 0.0);
  s.omega.resize(n, 0.0);
  s.pdc.resize(network_.lccs().size(), 0.0);

  Eigen::Index k = 0;
  for (std::size_t b : gens_) s.theta[b] = x[k++];
  for (std::size_t b : gens_) s.omega[b] = x[k++];
  for (std::size_t c : lagged_) s.pdc[c] = x[k++];
  for (std::size_t c : instant_) s.theta[network_.index_of(network_.lccs()[c].bus)] = x[k++];
  for (std::size_t c = 0; c < network_.lccs().size(); ++c) {
    if (!network_.lccs()[c].in_service) s.pdc[c] = 0.0;
  }

  std::vector<double> target(algebraic_.size());
  for (std::size_t q = 0; q < algebraic_.size(); ++q) {
    std::size_t i = algebraic_[q];
    target[q] = network_.bus(i).injection + lcc_injection(network_, i, s.pdc);
  }
  detail::solve_angles(network_, algebraic_, target, s.theta, settings_.newton_tol, settings_.newton_max_iter);

  std::vector<double> flow(n);
  detail::bus_flows(network_, s.theta, flow);

  for (std::size_t c : instant_) {
    const LccParams& lp = network_.lccs()[c];
    std::size_t b = network_.index_of(lp.bus);
    double kd = coefficients_.lcc[c];
    double om = (network_.bus(b).injection + lp.nominal - flow[b]) / kd;
    OrderEval ev = eval_order(lp, s.controllers[c], om);
    if (ev.saturated || ev.slope == 0.0) {
      fail(ErrorKind::UnsupportedRegime, "instantaneous LCC " + lp.name + " left the unsaturated droop regime");
    }
    s.omega[b] = om;
    s.pdc[c] = lp.nominal - kd * om;
  }

  Eigen::VectorXd pdot;
  solve_frequencies(s, pdot);

  const double wref = s.omega[network_.reference_bus()];
  Eigen::VectorXd dx(static_cast<Eigen::Index>(size_));
  k = 0;
  for (std::size_t b : gens_) dx[k++] = s.omega[b] - wref;
  for (std::size_t g = 0; g < ng; ++g) {
    std::size_t b = gens_[g];
    const GeneratorParams& gp = network_.generators()[gen_rec_[g]];
    double kg = coefficients_.generator[gen_rec_[g]];
    dx[k++] = (network_.bus(b).injection - flow[b] - kg * s.omega[b]) / gp.inertia;
  }
  for (Eigen::Index q = 0; q < pdot.size(); ++q) dx[k++] = pdot[q];
  for (std::size_t c : instant_) dx[k++] = s.omega[network_.index_of(network_.lccs()[c].bus)] - wref;
  return dx;
}

Eigen::VectorXd ClosedLoopModel::complete(SystemState& state) const { return derivative(pack(state), state); }

bool sample_controllers(const ClosedLoopModel& model, SystemState& state) {
  bool changed = false;
  const Network& net = model.network();
  for (std::size_t c = 0; c < net.lccs().size(); ++c) {
    const LccParams& lp = net.lccs()[c];
    if (!lp.in_service) continue;
    double om = state.omega[net.index_of(lp.bus)];
    bool receiving = lp.direction() > 0.0;
    LccDroopController& ctrl = state.controllers[c];
    OrderUpdate up = lcc_power_order(ctrl, receiving ? om : 0.0, receiving ? 0.0 : om);
    if (up.next.re_latched != ctrl.re_latched || up.next.se_latched != ctrl.se_latched ||
        up.next.lock != ctrl.lock) {
      changed = true;
    }
    ctrl = up.next;
  }
  return changed;
}

namespace {

// One RK4 step from (x, f = f(x)); on return `s` is the consistent state at
// the new point and the new derivative is returned through `f`.
Eigen::VectorXd rk4(const ClosedLoopModel& model, SystemState& s, const Eigen::VectorXd& x, Eigen::VectorXd& f,
                    double dt) {
  Eigen::VectorXd k2 = model.derivative(x + 0.5 * dt * f, s);
  Eigen::VectorXd k3 = model.derivative(x + 0.5 * dt * k2, s);
  Eigen::VectorXd k4 = model.derivative(x + dt * k3, s);
  Eigen::VectorXd xn = x + (dt / 6.0) * (f + 2.0 * k2 + 2.0 * k3 + k4);
  f = model.derivative(xn, s);
  return xn;
}

}  // namespace

SystemState step(const ClosedLoopModel& model, const SystemState& state, double dt) {
  SystemState s = state;
  Eigen::VectorXd x = model.pack(s);
  Eigen::VectorXd f = model.derivative(x, s);
  rk4(model, s, x, f, dt);
  s.time = state.time + dt;
  sample_controllers(model, s);
  return s;
}

// ---------------------------------------------------------------------------

Equilibrium steady_state(const Network& network, const DroopCoefficients& k, std::span<const bool> lcc_active,
                         const SolverSettings& settings) {
  const auto& gens = network.generators();
  const auto& lccs = network.lccs();
  double kg_sum = 0.0;
  for (std::size_t g = 0; g < gens.size(); ++g) {
    if (gens[g].in_service) kg_sum += k.generator[g];
  }
  std::vector<bool> responsive(lccs.size(), false);
  double kd_sum = 0.0;
  for (std::size_t c = 0; c < lccs.size(); ++c) {
    bool on = lcc_active.empty() || lcc_active[c];
    responsive[c] = lccs[c].in_service && on && k.lcc[c] > 0.0;
    if (responsive[c]) kd_sum += k.lcc[c];
  }
  if (!(kg_sum + kd_sum > 0.0)) fail(ErrorKind::ZeroTotalDroop, "total droop is zero");

  const double p_sum = network.total_injection();
  auto response = [&](std::size_t c, double w) {
    const LccParams& l = lccs[c];
    if (!l.in_service) return 0.0;
    if (!responsive[c]) return l.nominal;
    return std::clamp(l.nominal - k.lcc[c] * w, l.signed_lower(), l.signed_upper());
  };
  auto balance = [&](double w) {
    double g = p_sum - kg_sum * w;
    for (std::size_t c = 0; c < lccs.size(); ++c) g += response(c, w);
    return g;
  };

  double w = 0.0;
  double g0 = balance(0.0);
  if (g0 != 0.0) {
    // balance() is non-increasing; expand a bracket around the root
    double lo = 0.0;
    double hi = 0.0;
    double span = 1.0;
    int expand = 0;
    if (g0 > 0.0) {
      while (balance(span) > 0.0 && ++expand < 200) span *= 2.0;
      hi = span;
    } else {
      while (balance(-span) < 0.0 && ++expand < 200) span *= 2.0;
      lo = -span;
    }
    if (expand >= 200) fail(ErrorKind::NoSecureSolution, "no frequency balances the system");
    for (int it = 0; it < 300 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * span; ++it) {
      double mid = 0.5 * (lo + hi);
      (balance(mid) > 0.0 ? lo : hi) = mid;
    }
    w = 0.5 * (lo + hi);

    double fixed = p_sum;
    double slope = kg_sum;
    for (std::size_t c = 0; c < lccs.size(); ++c) {
      if (!lccs[c].in_service) continue;
      if (!responsive[c]) {
        fixed += lccs[c].nominal;
        continue;
      }
      double raw = lccs[c].nominal - k.lcc[c] * w;
      if (raw < lccs[c].signed_lower()) {
        fixed += lccs[c].signed_lower();
      } else if (raw > lccs[c].signed_upper()) {
        fixed += lccs[c].signed_upper();
      } else {
        fixed += lccs[c].nominal;
        slope += k.lcc[c];
      }
    }
    if (slope > 0.0) {
      double polished = fixed / slope;
      if (std::abs(balance(polished)) <= std::abs(balance(w))) w = polished;
    }
  }

  Equilibrium eq;
  eq.omega_syn = w;
  eq.balance_residual = balance(w);
  eq.pdc.assign(lccs.size(), 0.0);
  eq.u_lcc.assign(lccs.size(), 0.0);
  eq.saturated.assign(lccs.size(), false);
  eq.u_generator.assign(gens.size(), 0.0);
  for (std::size_t g = 0; g < gens.size(); ++g) {
    if (gens[g].in_service) eq.u_generator[g] = -k.generator[g] * w;
  }
  for (std::size_t c = 0; c < lccs.size(); ++c) {
    if (!lccs[c].in_service) continue;
    eq.pdc[c] = response(c, w);
    eq.u_lcc[c] = eq.pdc[c] - lccs[c].nominal;
    if (responsive[c]) {
      double raw = lccs[c].nominal - k.lcc[c] * w;
      eq.saturated[c] = raw < lccs[c].signed_lower() || raw > lccs[c].signed_upper();
    }
  }

  const std::size_t n = network.bus_count();
  const std::size_t ref = network.reference_bus();
  std::vector<std::size_t> unknown;
  std::vector<double> target;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == ref) continue;
    unknown.push_back(i);
    double t = network.bus(i).injection;
    if (auto g = network.generator_at(i)) t -= k.generator[*g] * w;
    if (auto c = network.lcc_at(i)) t += eq.pdc[*c];
    target.push_back(t);
  }
  eq.theta.assign(n, 0.0);
  try {
    detail::solve_angles(network, unknown, target, eq.theta, settings.newton_tol, 4 * settings.newton_max_iter);
  } catch (const Error& e) {
    fail(ErrorKind::NoSecureSolution, std::string("no steady angle solution in the security region: ") + e.what());
  }
  return eq;
}

SystemState initial_state(const ClosedLoopModel& model, double dead_zone) {
  const Network& net = model.network();
  const std::size_t nl = net.lccs().size();
  auto flags = std::make_unique<bool[]>(nl + 1);
  bool active = dead_zone <= 0.0;
  Equilibrium eq;
  if (!active) {
    eq = steady_state(net, model.coefficients(), std::span<const bool>(flags.get(), nl), model.settings());
    active = std::abs(eq.omega_syn) >= dead_zone;
  }
  if (active) {
    std::fill(flags.get(), flags.get() + nl, true);
    eq = steady_state(net, model.coefficients(), std::span<const bool>(flags.get(), nl), model.settings());
  }

  SystemState s;
  s.time = 0.0;
  s.theta = eq.theta;
  s.omega.assign(net.bus_count(), eq.omega_syn);
  s.pdc = eq.pdc;
  for (std::size_t c = 0; c < nl; ++c) s.controllers.push_back(model.make_controller(c, dead_zone, active));
  model.complete(s);
  return s;
}

Sample make_sample(const ClosedLoopModel& model, const SystemState& s) {
  const Network& net = model.network();
  const DroopCoefficients& k = model.coefficients();
  Sample out;
  out.time = s.time;
  out.theta = s.theta;
  out.omega = s.omega;
  out.pdc = s.pdc;
  out.saturated.assign(net.lccs().size(), false);
  out.droop_active.assign(net.lccs().size(), false);
  out.u_lcc.assign(net.lccs().size(), 0.0);
  for (std::size_t c = 0; c < net.lccs().size(); ++c) {
    const LccParams& lp = net.lccs()[c];
    if (!lp.in_service) continue;
    OrderEval ev = eval_order(lp, s.controllers[c], s.omega[net.index_of(lp.bus)]);
    out.saturated[c] = ev.saturated;
    out.droop_active[c] = s.controllers[c].active();
    out.u_lcc[c] = s.pdc[c] - lp.nominal;
  }
  out.u_generator.assign(net.generators().size(), 0.0);
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    const GeneratorParams& gp = net.generators()[g];
    if (gp.in_service) out.u_generator[g] = -k.generator[g] * s.omega[net.index_of(gp.bus)];
  }
  out.edge_flow.resize(net.line_count());
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    out.edge_flow[l] = -net.line_susceptance(l) * std::sin(s.theta[net.line_from(l)] - s.theta[net.line_to(l)]);
  }
  return out;
}

Network apply_event(const Network& network, const EventAction& action) {
  return std::visit(
      [&](const auto& a) -> Network {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, GeneratorTrip>) {
          return network.with_generator_tripped(a.bus);
        } else if constexpr (std::is_same_v<T, DcBlock>) {
          return network.with_dc_blocked(a.lcc);
        } else {
          return network.with_power_step(a.bus, a.delta);
        }
      },
      action);
}

namespace {

long checked_ratio(double a, double b, const char* what) {
  double r = a / b;
  long n = std::lround(r);
  if (std::abs(r - static_cast<double>(n)) > 1e-9 * std::max(1.0, r)) {
    fail(ErrorKind::InvalidParameter, std::string(what) + " must be an integer multiple of the step");
  }
  return n;
}

}  // namespace

Trajectory simulate(const Network& network, const Scenario& scenario, const DroopCoefficients& coefficients,
                    const SolverSettings& settings) {
  if (!(scenario.step > 0.0)) fail(ErrorKind::InvalidParameter, "step must be > 0");
  if (!(scenario.horizon >= 0.0)) fail(ErrorKind::InvalidParameter, "horizon must be >= 0");
  const double dt = scenario.step;
  const long every = checked_ratio(scenario.output_interval, dt, "output interval");
  if (every < 1) fail(ErrorKind::InvalidParameter, "output interval must be at least one step");
  const long n_steps = std::lround(std::floor(scenario.horizon / dt + 1e-9));
  const double dead_zone = scenario.control.dead_zone;
  for (const LccParams& l : network.lccs()) {
    if (l.in_service && l.time_constant == 0.0 && dead_zone > 0.0) {
      fail(ErrorKind::UnsupportedRegime, "instantaneous LCC model needs a zero dead zone");
    }
  }

  std::vector<std::pair<long, const Event*>> events;
  for (const Event& e : scenario.events) {
    long at = std::lround(std::ceil(e.time / dt - 1e-9));
    events.emplace_back(std::max(0L, at), &e);
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  Trajectory traj;
  traj.output_interval = scenario.output_interval;
  traj.coefficients = coefficients;
  std::size_t next_event = 0;

  try {
    auto model = std::make_unique<ClosedLoopModel>(network, coefficients, settings);
    SystemState s = initial_state(*model, dead_zone);
    Eigen::VectorXd x = model->pack(s);
    Eigen::VectorXd f = model->complete(s);

    for (long k = 0;; ++k) {
      s.time = static_cast<double>(k) * dt;
      bool touched = false;
      while (next_event < events.size() && events[next_event].first == k) {
        const Event& e = *events[next_event].second;
        Network next = apply_event(model->network(), e.action);
        std::size_t ref = next.reference_bus();
        if (ref != model->network().reference_bus()) {
          double shift = s.theta[ref];
          for (double& t : s.theta) t -= shift;
        }
        for (std::size_t c = 0; c < next.lccs().size(); ++c) {
          if (!next.lccs()[c].in_service) {
            s.pdc[c] = 0.0;
            s.controllers[c].reset();
          }
        }
        model = std::make_unique<ClosedLoopModel>(std::move(next), coefficients, settings);
        std::size_t idx = static_cast<std::size_t>((k + every - 1) / every);
        traj.events.push_back({s.time, describe(e.action), idx});
        ++next_event;
        touched = true;
      }
      if (touched) {
        f = model->complete(s);
        if (sample_controllers(*model, s)) f = model->complete(s);
        x = model->pack(s);
      }
      if (k % every == 0) traj.samples.push_back(make_sample(*model, s));
      if (k == n_steps) break;

      x = rk4(*model, s, x, f, dt);
      s.time = static_cast<double>(k + 1) * dt;
      if (sample_controllers(*model, s)) f = model->complete(s);
    }
    traj.final_network = model->network();
  } catch (const Error& e) {
    traj.failed = true;
    traj.failure_kind = e.kind();
    traj.failure = e.what();
  }
  return traj;
}

Trajectory simulate(const Network& network, const Scenario& scenario) {
  return simulate(network, scenario, design_coefficients(network, scenario.control));
}

}  // namespace midc
