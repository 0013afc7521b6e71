#include "midc/trajectory_io.hpp"

#include <charconv>
#include <cmath>
#include <string>

namespace midc {

double system_frequency(const Sample& sample, const Network& network) {
  double num = 0.0;
  double den = 0.0;
  for (const GeneratorParams& g : network.generators()) {
    if (!g.in_service) continue;
    num += g.inertia * sample.omega[network.index_of(g.bus)];
    den += g.inertia;
  }
  return den > 0.0 ? num / den : 0.0;
}

TrajectorySummary summarize(const Trajectory& trajectory, const Network& network, double band_hz) {
  TrajectorySummary out;
  if (trajectory.samples.empty()) return out;
  const Sample& last = trajectory.samples.back();
  const double f0 = network.bases().frequency_hz;
  double start = trajectory.events.empty() ? 0.0 : trajectory.events.back().time;
  const Network& after = trajectory.final_network ? *trajectory.final_network : network;
  auto frequency = [&](const Sample& s) { return system_frequency(s, s.time >= start ? after : network); };
  out.terminal_omega = frequency(last);
  out.terminal_hz = f0 * (1.0 + out.terminal_omega);
  out.u_generator = last.u_generator;
  out.u_lcc = last.u_lcc;

  double band = band_hz / f0;
  std::optional<double> last_outside;
  for (const Sample& s : trajectory.samples) {
    double w = frequency(s);
    if (std::abs(w) > std::abs(out.nadir_omega)) out.nadir_omega = w;
    if (s.time >= start && std::abs(w - out.terminal_omega) > band) last_outside = s.time;
  }
  if (!last_outside) {
    out.settling_time = 0.0;
  } else if (*last_outside < last.time) {
    out.settling_time = *last_outside + trajectory.output_interval - start;
  }
  return out;
}

namespace {

void put(std::ostream& out, double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  out.write(buf, r.ptr - buf);
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, const Network& network) {
  out << "time_s";
  for (const Bus& b : network.buses()) out << ",omega_pu_" << b.id << ",theta_rad_" << b.id;
  for (const LccParams& l : network.lccs()) out << ",pdc_pu_" << l.name << ",sat_" << l.name;
  for (const GeneratorParams& g : network.generators()) out << ",uG_pu_" << g.bus;
  out << '\n';
  for (const Sample& s : trajectory.samples) {
    put(out, s.time);
    for (std::size_t i = 0; i < s.omega.size(); ++i) {
      out << ',';
      put(out, s.omega[i]);
      out << ',';
      put(out, s.theta[i]);
    }
    for (std::size_t c = 0; c < s.pdc.size(); ++c) {
      out << ',';
      put(out, s.pdc[c]);
      out << ',' << (s.saturated[c] ? 1 : 0);
    }
    for (double u : s.u_generator) {
      out << ',';
      put(out, u);
    }
    out << '\n';
  }
}

}  // namespace midc
