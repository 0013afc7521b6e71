#include "network_math.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "midc/error.hpp"

namespace midc::detail {

void bus_flows(const Network& net, std::span<const double> theta, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    std::size_t i = net.line_from(l);
    std::size_t j = net.line_to(l);
    double f = net.line_susceptance(l) * std::sin(theta[i] - theta[j]);
    out[i] += f;
    out[j] -= f;
  }
}

std::vector<std::size_t> positions(std::size_t n, std::span<const std::size_t> subset) {
  std::vector<std::size_t> pos(n, npos);
  for (std::size_t k = 0; k < subset.size(); ++k) pos[subset[k]] = k;
  return pos;
}

void laplacian_block(const Network& net, std::span<const double> theta, std::span<const std::size_t> subset,
                     std::span<const std::size_t> pos, Eigen::MatrixXd& out) {
  const auto m = static_cast<Eigen::Index>(subset.size());
  out.setZero(m, m);
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    std::size_t i = net.line_from(l);
    std::size_t j = net.line_to(l);
    std::size_t pi = pos[i];
    std::size_t pj = pos[j];
    if (pi == npos && pj == npos) continue;
    double w = net.line_susceptance(l) * std::cos(theta[i] - theta[j]);
    if (pi != npos) out(pi, pi) += w;
    if (pj != npos) out(pj, pj) += w;
    if (pi != npos && pj != npos) {
      out(pi, pj) -= w;
      out(pj, pi) -= w;
    }
  }
}

bool inside_security_region(const Network& net, std::span<const double> theta) {
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    if (std::abs(theta[net.line_from(l)] - theta[net.line_to(l)]) >= std::numbers::pi / 2) return false;
  }
  return true;
}

NewtonReport solve_angles(const Network& net, std::span<const std::size_t> unknown, std::span<const double> target,
                          std::span<double> theta, double tol, int max_iter) {
  NewtonReport rep;
  if (unknown.empty()) return rep;

  for (std::size_t k = 0; k < unknown.size(); ++k) {
    double capacity = 0.0;
    for (const Incidence& inc : net.incident(unknown[k])) capacity += net.line_susceptance(inc.line);
    if (std::abs(target[k]) > capacity) {
      fail(ErrorKind::InfeasibleFlow, "bus " + std::to_string(net.bus(unknown[k]).id) + " requires flow " +
                                          std::to_string(target[k]) + " p.u. beyond line capacity " +
                                          std::to_string(capacity));
    }
  }

  const std::size_t n = net.bus_count();
  std::vector<std::size_t> pos = positions(n, unknown);
  std::vector<double> flow(n);
  Eigen::VectorXd r(static_cast<Eigen::Index>(unknown.size()));
  Eigen::MatrixXd h;

  for (int it = 0; it <= max_iter; ++it) {
    bus_flows(net, theta, flow);
    for (std::size_t k = 0; k < unknown.size(); ++k) r[static_cast<Eigen::Index>(k)] = target[k] - flow[unknown[k]];
    rep.residual = r.cwiseAbs().maxCoeff();
    rep.iterations = it;
    if (rep.residual <= tol) {
      if (!inside_security_region(net, theta)) {
        fail(ErrorKind::NewtonDivergence, "angle solution lies outside the security region");
      }
      return rep;
    }
    if (!std::isfinite(rep.residual)) break;
    laplacian_block(net, theta, unknown, pos, h);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) {
      fail(ErrorKind::NewtonDivergence, "flow Jacobian lost definiteness (angles outside the security region)");
    }
    Eigen::VectorXd d = llt.solve(r);
    double step = d.cwiseAbs().maxCoeff();
    double scale = step > 0.5 ? 0.5 / step : 1.0;
    for (std::size_t k = 0; k < unknown.size(); ++k) theta[unknown[k]] += scale * d[static_cast<Eigen::Index>(k)];
  }
  fail(ErrorKind::NewtonDivergence, "angle Newton iteration did not converge (residual " +
                                        std::to_string(rep.residual) + ")");
}

}  // namespace midc::detail
