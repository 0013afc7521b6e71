#include "midc/oefc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "midc/error.hpp"

namespace midc {

double cost_generator(double u, double beta) { return 0.5 * beta * u * u; }

double regulation_margin(double nominal, double upper, double lower, MarginDirection direction) {
  return direction == MarginDirection::Increase ? upper - nominal : nominal - lower;
}

double LccCostWeights::quadratic_weight() const {
  if (objective == Objective::I) return alpha / (margin * margin);
  return e / (kf * kf);
}

double cost_lcc(double u, const LccCostWeights& weights) {
  if (weights.objective == Objective::I) {
    double r = u / weights.margin;
    return weights.alpha * r * r;
  }
  double r = u / weights.kf;
  return weights.e * r * r;
}

void OefcProblem::validate() const {
  for (double b : beta) {
    if (!(b > 0.0)) fail(ErrorKind::InvalidParameter, "generator cost coefficient must be > 0");
  }
  for (const OefcLcc& l : lccs) {
    double w = l.weights.quadratic_weight();
    if (!(w > 0.0) || !std::isfinite(w)) fail(ErrorKind::InvalidParameter, "LCC quadratic cost weight must be finite and > 0");
    if (!(l.lower <= 0.0 && 0.0 <= l.upper)) fail(ErrorKind::InvalidParameter, "LCC regulation box must contain 0");
  }
  if (!std::isfinite(imbalance)) fail(ErrorKind::InvalidParameter, "imbalance must be finite");
}

LccCostWeights lcc_cost_weights(const LccParams& lcc, Objective objective, MarginDirection margin) {
  LccCostWeights w;
  w.objective = objective;
  if (objective == Objective::I) {
    if (!lcc.alpha) fail(ErrorKind::MissingParameter, "LCC " + lcc.name + ": objective I needs alpha");
    w.alpha = *lcc.alpha;
    w.margin = regulation_margin(std::abs(lcc.nominal), lcc.upper, lcc.lower, margin);
    if (!(w.margin > 0.0)) {
      fail(ErrorKind::InvalidParameter, "LCC " + lcc.name + ": regulation margin is zero in the chosen direction");
    }
  } else {
    if (!lcc.adjacent_regulation) fail(ErrorKind::MissingParameter, "LCC " + lcc.name + ": objective II needs K^f (kf)");
    if (!lcc.cost_e) fail(ErrorKind::MissingParameter, "LCC " + lcc.name + ": objective II needs e");
    w.kf = *lcc.adjacent_regulation;
    w.e = *lcc.cost_e;
  }
  return w;
}

OefcProblem make_oefc_problem(const Network& network, Objective objective, MarginDirection margin) {
  OefcProblem p;
  for (std::size_t g = 0; g < network.generators().size(); ++g) {
    const GeneratorParams& gen = network.generators()[g];
    if (!gen.in_service) continue;
    p.beta.push_back(gen.cost_beta);
    p.generator_records.push_back(g);
  }
  for (std::size_t c = 0; c < network.lccs().size(); ++c) {
    const LccParams& lcc = network.lccs()[c];
    if (!lcc.in_service) continue;
    OefcLcc l;
    l.weights = lcc_cost_weights(lcc, objective, margin);
    l.lower = lcc.signed_lower() - lcc.nominal;
    l.upper = lcc.signed_upper() - lcc.nominal;
    p.lccs.push_back(l);
    p.lcc_records.push_back(c);
  }
  p.imbalance = network.total_injection() + network.total_lcc_nominal();
  p.validate();
  return p;
}

OptimalDroop optimal_droop(const OefcProblem& problem) {
  OptimalDroop k;
  for (double b : problem.beta) k.generator.push_back(1.0 / b);
  for (const OefcLcc& l : problem.lccs) {
    const LccCostWeights& w = l.weights;
    if (w.objective == Objective::I) {
      k.lcc.push_back(w.margin * w.margin / (2.0 * w.alpha));
    } else {
      k.lcc.push_back(w.kf * w.kf / (2.0 * w.e));
    }
  }
  return k;
}

double average_droop(std::span<const double> coefficients) {
  if (coefficients.empty()) fail(ErrorKind::InvalidParameter, "average of an empty coefficient set");
  return std::accumulate(coefficients.begin(), coefficients.end(), 0.0) / static_cast<double>(coefficients.size());
}

bool OefcSolution::any_bound_active() const {
  return std::find(at_lower.begin(), at_lower.end(), true) != at_lower.end() ||
         std::find(at_upper.begin(), at_upper.end(), true) != at_upper.end();
}

namespace {

double lcc_response(const OefcLcc& l, double lambda) {
  return std::clamp(-lambda / (2.0 * l.weights.quadratic_weight()), l.lower, l.upper);
}

double balance(const OefcProblem& p, double lambda) {
  double g = p.imbalance;
  for (double b : p.beta) g -= lambda / b;
  for (const OefcLcc& l : p.lccs) g += lcc_response(l, lambda);
  return g;
}

}  // namespace

OefcSolution solve_oefc_oracle(const OefcProblem& problem, double tol) {
  problem.validate();
  OefcSolution sol;

  double bound = 1.0;
  if (!problem.beta.empty()) {
    double max_beta = *std::max_element(problem.beta.begin(), problem.beta.end());
    bound = std::abs(problem.imbalance) * max_beta + 1.0;
  } else {
    for (const OefcLcc& l : problem.lccs) {
      double w2 = 2.0 * l.weights.quadratic_weight();
      bound = std::max(bound, w2 * std::max(-l.lower, l.upper) + 1.0);
    }
  }
  double lo = -bound;
  double hi = bound;
  if (balance(problem, lo) < 0.0 || balance(problem, hi) > 0.0) {
    fail(ErrorKind::Infeasible, "the regulation boxes cannot absorb the imbalance");
  }

  double lambda = 0.0;
  if (problem.imbalance != 0.0) {
    // balance() is non-increasing in lambda
    for (int it = 0; it < 400; ++it) {
      sol.iterations = it + 1;
      double mid = 0.5 * (lo + hi);
      double g = balance(problem, mid);
      if (g > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      lambda = mid;
      if (std::abs(g) <= 0.1 * tol || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * bound) break;
    }

    // exact solve on the active set seen at the bisection point
    double fixed = problem.imbalance;
    double slope = 0.0;
    for (double b : problem.beta) slope += 1.0 / b;
    for (const OefcLcc& l : problem.lccs) {
      double raw = -lambda / (2.0 * l.weights.quadratic_weight());
      if (raw <= l.lower) {
        fixed += l.lower;
      } else if (raw >= l.upper) {
        fixed += l.upper;
      } else {
        slope += 1.0 / (2.0 * l.weights.quadratic_weight());
      }
    }
    if (slope > 0.0) {
      double polished = fixed / slope;
      if (std::abs(balance(problem, polished)) <= std::abs(balance(problem, lambda))) lambda = polished;
    }
  }

  sol.lambda = lambda;
  for (double b : problem.beta) sol.u_generator.push_back(-lambda / b);
  for (const OefcLcc& l : problem.lccs) {
    double raw = -lambda / (2.0 * l.weights.quadratic_weight());
    sol.u_lcc.push_back(std::clamp(raw, l.lower, l.upper));
    sol.at_lower.push_back(raw < l.lower);
    sol.at_upper.push_back(raw > l.upper);
  }
  sol.balance_residual = balance(problem, lambda);
  sol.cost = total_cost(problem, sol.u_generator, sol.u_lcc);
  if (std::abs(sol.balance_residual) > tol) {
    fail(ErrorKind::NoConvergence, "oracle balance residual above tolerance");
  }
  return sol;
}

double total_cost(const OefcProblem& problem, std::span<const double> u_generator, std::span<const double> u_lcc) {
  double c = 0.0;
  for (std::size_t i = 0; i < problem.beta.size(); ++i) c += cost_generator(u_generator[i], problem.beta[i]);
  for (std::size_t i = 0; i < problem.lccs.size(); ++i) c += cost_lcc(u_lcc[i], problem.lccs[i].weights);
  return c;
}

double dual_function_value(double lambda, const OefcProblem& problem) {
  double phi = lambda * problem.imbalance;
  for (double b : problem.beta) phi -= lambda * lambda / (2.0 * b);
  for (const OefcLcc& l : problem.lccs) {
    double u = lcc_response(l, lambda);
    phi += l.weights.quadratic_weight() * u * u + lambda * u;
  }
  return phi;
}

DroopCoefficients design_coefficients(const Network& network, const ControlConfig& control) {
  DroopCoefficients k;
  const auto& gens = network.generators();
  const auto& lccs = network.lccs();

  if (control.droop == DroopSource::Manual) {
    for (const GeneratorParams& g : gens) k.generator.push_back(effective_gen_droop(g.governor_droop, g.damping));
    for (const LccParams& l : lccs) {
      auto it = control.manual_lcc.find(l.name);
      if (it == control.manual_lcc.end()) {
        fail(ErrorKind::MissingParameter, "manual droop needs kd." + l.name);
      }
      k.lcc.push_back(it->second);
    }
  } else {
    for (const GeneratorParams& g : gens) k.generator.push_back(1.0 / g.cost_beta);
    for (const LccParams& l : lccs) {
      OefcProblem one;
      one.lccs.push_back({lcc_cost_weights(l, control.objective, control.margin), 0.0, 0.0});
      k.lcc.push_back(optimal_droop(one).lcc.front());
    }
    if (control.droop == DroopSource::Average) {
      if (!k.generator.empty()) std::fill(k.generator.begin(), k.generator.end(), average_droop(k.generator));
      if (!k.lcc.empty()) std::fill(k.lcc.begin(), k.lcc.end(), average_droop(k.lcc));
    }
  }

  for (std::size_t g = 0; g < gens.size(); ++g) {
    if (auto it = control.manual_generator.find(gens[g].bus); it != control.manual_generator.end()) {
      k.generator[g] = it->second;
    }
  }
  if (control.droop != DroopSource::Manual) {
    for (std::size_t c = 0; c < lccs.size(); ++c) {
      if (auto it = control.manual_lcc.find(lccs[c].name); it != control.manual_lcc.end()) k.lcc[c] = it->second;
    }
  }
  if (!control.lcc_droop) std::fill(k.lcc.begin(), k.lcc.end(), 0.0);

  for (double v : k.generator) {
    if (!(v > 0.0)) fail(ErrorKind::InvalidParameter, "generator droop coefficients must be > 0");
  }
  for (double v : k.lcc) {
    if (!(v >= 0.0)) fail(ErrorKind::InvalidParameter, "LCC droop coefficients must be >= 0");
  }
  return k;
}

}  // namespace midc
