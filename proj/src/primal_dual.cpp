#include "midc/primal_dual.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "midc/error.hpp"
#include "network_math.hpp"

namespace midc {

using detail::npos;

PdProblem make_pd_problem(const Network& network, const DroopCoefficients& coefficients) {
  PdProblem p{network, {}, {}, {}, {}, {}};
  for (std::size_t g = 0; g < network.generators().size(); ++g) {
    const GeneratorParams& gp = network.generators()[g];
    p.beta.push_back(1.0 / coefficients.generator[g]);
    p.tau.push_back(1.0 / gp.inertia);
  }
  for (std::size_t c = 0; c < network.lccs().size(); ++c) {
    const LccParams& l = network.lccs()[c];
    p.lcc_gain.push_back(coefficients.lcc[c]);
    p.lcc_lower.push_back(l.signed_lower() - l.nominal);
    p.lcc_upper.push_back(l.signed_upper() - l.nominal);
  }
  return p;
}

double oriented_nu(const PdState& state, const Network& network, std::size_t line, std::size_t i) {
  return network.line_from(line) == i ? state.nu[line] : -state.nu[line];
}

std::vector<double> edge_stepsizes(const PdState& state, const Network& network) {
  if (state.mode == GammaMode::Frozen) return state.gamma;
  std::vector<double> g(network.line_count());
  for (std::size_t l = 0; l < network.line_count(); ++l) {
    g[l] = network.line_susceptance(l) * std::cos(state.phi[network.line_from(l)] - state.phi[network.line_to(l)]);
  }
  return g;
}

namespace {

double nu_sum(const PdState& s, const Network& net, std::size_t i) {
  double acc = 0.0;
  for (const Incidence& inc : net.incident(i)) acc += oriented_nu(s, net, inc.line, i);
  return acc;
}

std::vector<std::size_t> passive_buses(const Network& net) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    if (net.bus(i).role == BusRole::Passive) out.push_back(i);
  }
  return out;
}

// Weighted Laplacian block on `subset` using explicit edge weights.
Eigen::MatrixXd weighted_block(const Network& net, const std::vector<double>& w, std::span<const std::size_t> subset,
                               std::span<const std::size_t> pos) {
  const auto m = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    std::size_t pi = pos[net.line_from(l)];
    std::size_t pj = pos[net.line_to(l)];
    if (pi != npos) out(pi, pi) += w[l];
    if (pj != npos) out(pj, pj) += w[l];
    if (pi != npos && pj != npos) {
      out(pi, pj) -= w[l];
      out(pj, pi) -= w[l];
    }
  }
  return out;
}

}  // namespace

PdState consistent_pd_start(const PdProblem& problem) {
  const Network& net = problem.network;
  PdState s;
  s.mode = GammaMode::Frozen;
  s.lambda.assign(net.bus_count(), 0.0);
  s.nu.assign(net.line_count(), 0.0);
  s.gamma.resize(net.line_count());
  for (std::size_t l = 0; l < net.line_count(); ++l) s.gamma[l] = net.line_susceptance(l);

  // nu_ij = -gamma_ij (psi_i - psi_j) with psi = 0 on generator buses and
  // L_AA psi_A = P_A + P^D_A on the rest, so sum_j nu_ij = -(P_i + P^D_i).
  std::vector<std::size_t> alg = algebraic_buses(net);
  if (!alg.empty()) {
    std::vector<std::size_t> pos = detail::positions(net.bus_count(), alg);
    Eigen::MatrixXd l = weighted_block(net, s.gamma, alg, pos);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(alg.size()));
    for (std::size_t k = 0; k < alg.size(); ++k) {
      double t = net.bus(alg[k]).injection;
      if (auto c = net.lcc_at(alg[k])) t += net.lccs()[*c].nominal;
      rhs[static_cast<Eigen::Index>(k)] = t;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(l);
    if (llt.info() != Eigen::Success) fail(ErrorKind::SingularJacobian, "cannot balance the non-generator buses");
    Eigen::VectorXd psi_a = llt.solve(rhs);
    std::vector<double> psi(net.bus_count(), 0.0);
    for (std::size_t k = 0; k < alg.size(); ++k) psi[alg[k]] = psi_a[static_cast<Eigen::Index>(k)];
    for (std::size_t e = 0; e < net.line_count(); ++e) {
      s.nu[e] = -s.gamma[e] * (psi[net.line_from(e)] - psi[net.line_to(e)]);
    }
  }
  solve_pd_algebraic(problem, s);
  return s;
}

void solve_pd_algebraic(const PdProblem& problem, PdState& s) {
  const Network& net = problem.network;
  for (std::size_t c = 0; c < net.lccs().size(); ++c) {
    const LccParams& lp = net.lccs()[c];
    if (!lp.in_service) continue;
    std::size_t i = net.index_of(lp.bus);
    double k = problem.lcc_gain[c];
    if (!(k > 0.0)) fail(ErrorKind::UnsupportedRegime, "LCC " + lp.name + " has no droop gain to set its multiplier");
    // 0 = P_i + P^D_i + clamp(-k lambda) + sum nu
    double need = -(net.bus(i).injection + lp.nominal + nu_sum(s, net, i));
    if (need < problem.lcc_lower[c] || need > problem.lcc_upper[c]) {
      fail(ErrorKind::NewtonDivergence, "LCC " + lp.name + ": no multiplier balances the bus inside the regulation box");
    }
    s.lambda[i] = -need / k;
  }

  std::vector<std::size_t> pas = passive_buses(net);
  if (pas.empty()) return;
  std::vector<double> gamma = edge_stepsizes(s, net);
  std::vector<std::size_t> pos = detail::positions(net.bus_count(), pas);
  Eigen::MatrixXd l = weighted_block(net, gamma, pas, pos);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pas.size()));
  for (std::size_t k = 0; k < pas.size(); ++k) {
    for (const Incidence& inc : net.incident(pas[k])) {
      if (pos[inc.neighbor] == npos) rhs[static_cast<Eigen::Index>(k)] += gamma[inc.line] * s.lambda[inc.neighbor];
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(l);
  if (llt.info() != Eigen::Success) fail(ErrorKind::NewtonDivergence, "passive-bus multiplier block is singular");
  Eigen::VectorXd lp = llt.solve(rhs);
  for (std::size_t k = 0; k < pas.size(); ++k) s.lambda[pas[k]] = lp[static_cast<Eigen::Index>(k)];
}

namespace {

std::vector<std::size_t> generator_buses(const Network& net) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    if (net.bus(i).role == BusRole::Generator) out.push_back(i);
  }
  return out;
}

Eigen::VectorXd pack(const Network& net, const PdState& s) {
  std::vector<std::size_t> gens = generator_buses(net);
  std::size_t np = s.mode == GammaMode::AngleDependent ? net.bus_count() : 0;
  Eigen::VectorXd x(static_cast<Eigen::Index>(gens.size() + net.line_count() + np));
  Eigen::Index k = 0;
  for (std::size_t i : gens) x[k++] = s.lambda[i];
  for (double v : s.nu) x[k++] = v;
  for (std::size_t i = 0; i < np; ++i) x[k++] = s.phi[i];
  return x;
}

void unpack(const Network& net, const Eigen::VectorXd& x, PdState& s) {
  Eigen::Index k = 0;
  for (std::size_t i : generator_buses(net)) s.lambda[i] = x[k++];
  for (double& v : s.nu) v = x[k++];
  if (s.mode == GammaMode::AngleDependent) {
    for (double& v : s.phi) v = x[k++];
  }
}

Eigen::VectorXd stage(const PdProblem& problem, PdState& s, const Eigen::VectorXd& x) {
  unpack(problem.network, x, s);
  solve_pd_algebraic(problem, s);
  return pd_derivative(problem, s);
}

}  // namespace

Eigen::VectorXd pd_derivative(const PdProblem& problem, const PdState& s) {
  const Network& net = problem.network;
  std::vector<std::size_t> gens = generator_buses(net);
  std::size_t np = s.mode == GammaMode::AngleDependent ? net.bus_count() : 0;
  Eigen::VectorXd dx(static_cast<Eigen::Index>(gens.size() + net.line_count() + np));
  Eigen::Index k = 0;
  for (std::size_t i : gens) {
    std::size_t g = *net.generator_at(i);
    dx[k++] = problem.tau[g] * (-s.lambda[i] / problem.beta[g] + net.bus(i).injection + nu_sum(s, net, i));
  }
  std::vector<double> gamma = edge_stepsizes(s, net);
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    dx[k++] = -gamma[l] * (s.lambda[net.line_from(l)] - s.lambda[net.line_to(l)]);
  }
  if (np > 0) {
    double ref = s.lambda[net.reference_bus()];
    for (std::size_t i = 0; i < np; ++i) dx[k++] = s.lambda[i] - ref;
  }
  return dx;
}

PdState pd_step(const PdState& state, const PdProblem& problem, double h) {
  PdState s = state;
  Eigen::VectorXd x = pack(problem.network, s);
  Eigen::VectorXd k1 = stage(problem, s, x);
  Eigen::VectorXd k2 = stage(problem, s, x + 0.5 * h * k1);
  Eigen::VectorXd k3 = stage(problem, s, x + 0.5 * h * k2);
  Eigen::VectorXd k4 = stage(problem, s, x + h * k3);
  unpack(problem.network, x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), s);
  solve_pd_algebraic(problem, s);
  s.time = state.time + h;
  return s;
}

PdResult run_pd(const PdProblem& problem, PdState init, double tol, double max_time, double h) {
  const Network& net = problem.network;
  PdResult r;
  r.state = std::move(init);
  solve_pd_algebraic(problem, r.state);
  const long limit = static_cast<long>(std::ceil(max_time / h));
  for (;;) {
    Eigen::VectorXd d = pd_derivative(problem, r.state);
    double rate = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
    if (rate <= tol) break;
    if (r.steps >= limit) {
      fail(ErrorKind::NoConvergence, "primal-dual flow still moving at rate " + std::to_string(rate) + " after " +
                                         std::to_string(max_time) + " s");
    }
    r.state = pd_step(r.state, problem, h);
    ++r.steps;
  }
  r.time = r.state.time;
  double sum = 0.0;
  for (double v : r.state.lambda) sum += v;
  r.lambda_star = sum / static_cast<double>(r.state.lambda.size());
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    r.consensus_gap = std::max(r.consensus_gap, std::abs(r.state.lambda[net.line_from(l)] - r.state.lambda[net.line_to(l)]));
  }
  return r;
}

PdState map_dynamics_to_pd(const Sample& sample, const Network& network) {
  PdState s;
  s.time = sample.time;
  s.mode = GammaMode::AngleDependent;
  s.lambda = sample.omega;
  s.phi = sample.theta;
  s.nu.resize(network.line_count());
  s.gamma.resize(network.line_count());
  for (std::size_t l = 0; l < network.line_count(); ++l) {
    double d = sample.theta[network.line_from(l)] - sample.theta[network.line_to(l)];
    s.nu[l] = -network.line_susceptance(l) * std::sin(d);
    s.gamma[l] = network.line_susceptance(l) * std::cos(d);
  }
  return s;
}

}  // namespace midc
