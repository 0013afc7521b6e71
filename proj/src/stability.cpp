#include "midc/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "midc/error.hpp"
#include "network_math.hpp"

namespace midc {

SecurityCheck check_security(std::span<const double> theta, const Network& network) {
  SecurityCheck out;
  out.margin = std::numbers::pi / 2;
  for (std::size_t l = 0; l < network.line_count(); ++l) {
    double m = std::numbers::pi / 2 - std::abs(theta[network.line_from(l)] - theta[network.line_to(l)]);
    if (m < out.margin) {
      out.margin = m;
      out.worst_line = l;
    }
  }
  out.secure = out.margin > 0.0;
  return out;
}

Eigen::MatrixXd hessian_fc(std::span<const double> theta, const Network& network) {
  std::vector<std::size_t> all(network.bus_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  Eigen::MatrixXd h;
  detail::laplacian_block(network, theta, all, all, h);
  return h;
}

HessianReport analyze_hessian(std::span<const double> theta, const Network& network) {
  HessianReport r;
  Eigen::MatrixXd h = hessian_fc(theta, network);
  const Eigen::Index n = h.rows();
  r.asymmetry = (h - h.transpose()).cwiseAbs().maxCoeff();
  r.max_row_sum = h.rowwise().sum().cwiseAbs().maxCoeff();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::VectorXd& ev = es.eigenvalues();
  r.smallest = ev[0];
  r.largest = ev[n - 1];
  r.second_smallest = n > 1 ? ev[1] : 0.0;
  double scale = std::max(1.0, std::abs(r.largest));
  double kernel_tol = 1e-10 * scale;
  Eigen::VectorXd v0 = es.eigenvectors().col(0);
  r.kernel_is_ones = std::abs(v0.sum()) / std::sqrt(static_cast<double>(n)) >= 1.0 - 1e-9;
  r.psd_one_dim_kernel = std::abs(r.smallest) <= kernel_tol && (n == 1 || r.second_smallest > kernel_tol) &&
                         r.kernel_is_ones;

  // every proper principal submatrix sits inside one of the n-1 order ones
  r.principal_minors_pd = true;
  for (Eigen::Index drop = 0; drop < n && n > 1; ++drop) {
    Eigen::MatrixXd m(n - 1, n - 1);
    for (Eigen::Index i = 0, a = 0; i < n; ++i) {
      if (i == drop) continue;
      for (Eigen::Index j = 0, b = 0; j < n; ++j) {
        if (j == drop) continue;
        m(a, b++) = h(i, j);
      }
      ++a;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
      r.principal_minors_pd = false;
      break;
    }
  }
  return r;
}

LyapunovConfig make_lyapunov_config(const Network& network, const DroopCoefficients& coefficients,
                                    const Equilibrium& reference, double scale) {
  LyapunovConfig c;
  c.reference = reference;
  c.d.assign(network.lccs().size(), 0.0);
  for (std::size_t i = 0; i < network.lccs().size(); ++i) {
    if (coefficients.lcc[i] > 0.0) c.d[i] = scale / coefficients.lcc[i];
  }
  return c;
}

LyapunovValue lyapunov_value(const Sample& s, const LyapunovConfig& config, const Network& network) {
  const Equilibrium& ref = config.reference;
  LyapunovValue out;
  // Bregman divergence of F_c = -sum B cos(theta_ij), line by line
  for (std::size_t l = 0; l < network.line_count(); ++l) {
    std::size_t i = network.line_from(l);
    std::size_t j = network.line_to(l);
    double t0 = ref.theta[i] - ref.theta[j];
    double delta = (s.theta[i] - s.theta[j]) - t0;
    double half = std::sin(0.5 * delta);
    out.v1 += network.line_susceptance(l) * (2.0 * std::cos(t0) * half * half - std::sin(t0) * (delta - std::sin(delta)));
  }
  for (const GeneratorParams& g : network.generators()) {
    if (!g.in_service) continue;
    double dw = s.omega[network.index_of(g.bus)] - ref.omega_syn;
    out.v1 += 0.5 * g.inertia * dw * dw;
  }
  for (std::size_t c = 0; c < network.lccs().size(); ++c) {
    const LccParams& l = network.lccs()[c];
    if (!l.in_service) continue;
    double dp = s.pdc[c] - ref.pdc[c];
    out.v2 += 0.5 * config.d[c] * l.time_constant * dp * dp;
  }
  out.v = out.v1 + out.v2;
  return out;
}

bool lyapunov_diagonal_blocks_positive(const LyapunovConfig& config, const Network& network) {
  for (const GeneratorParams& g : network.generators()) {
    if (g.in_service && !(g.inertia > 0.0)) return false;
  }
  for (std::size_t c = 0; c < network.lccs().size(); ++c) {
    const LccParams& l = network.lccs()[c];
    if (l.in_service && !(config.d[c] * l.time_constant > 0.0)) return false;
  }
  return true;
}

namespace {
constexpr double kVdotNoiseFloor = 1e-16;
}  // namespace

LyapunovReport lyapunov_decrease_report(const Trajectory& trajectory, std::size_t first, const LyapunovConfig& config,
                                        const Network& network, double relative_tol) {
  LyapunovReport r;
  const auto& samples = trajectory.samples;
  for (std::size_t i = first; i < samples.size(); ++i) {
    r.series.push_back({samples[i].time, lyapunov_value(samples[i], config, network).v, 0.0});
  }
  if (r.series.empty()) return r;
  r.min_v = r.series.front().v;
  for (const LyapunovPoint& p : r.series) {
    r.max_v = std::max(r.max_v, p.v);
    r.min_v = std::min(r.min_v, p.v);
  }
  r.terminal_v = r.series.back().v;
  // floor at solver noise so an unperturbed run cannot flag violations
  r.threshold = std::max(relative_tol * r.max_v, kVdotNoiseFloor);
  r.max_v_dot = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < r.series.size(); ++k) {
    double dt = r.series[k + 1].time - r.series[k - 1].time;
    r.series[k].v_dot = (r.series[k + 1].v - r.series[k - 1].v) / dt;
    r.max_v_dot = std::max(r.max_v_dot, r.series[k].v_dot);
    if (r.series[k].v_dot > r.threshold) r.violations.push_back(k);
  }
  if (r.series.size() < 3) r.max_v_dot = 0.0;
  return r;
}

double synchronous_frequency(const Network& network, const DroopCoefficients& coefficients) {
  double num = network.total_injection() + network.total_lcc_nominal();
  double den = 0.0;
  for (std::size_t g = 0; g < network.generators().size(); ++g) {
    if (network.generators()[g].in_service) den += coefficients.generator[g];
  }
  for (std::size_t c = 0; c < network.lccs().size(); ++c) {
    if (network.lccs()[c].in_service) den += coefficients.lcc[c];
  }
  if (!(den > 0.0)) fail(ErrorKind::ZeroTotalDroop, "total droop is zero");
  return num / den;
}

}  // namespace midc
