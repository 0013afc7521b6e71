#include "midc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "midc/error.hpp"

namespace midc {

std::string_view to_string(BusRole role) {
  switch (role) {
    case BusRole::Generator: return "generator";
    case BusRole::LccConnected: return "lcc";
    case BusRole::Passive: return "passive";
  }
  return "passive";
}

namespace {

std::string bus_label(int id) { return "bus " + std::to_string(id); }

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void Network::validate() const {
  std::unordered_map<int, BusRole> roles;
  for (const Bus& b : buses_) {
    auto [it, inserted] = roles.emplace(b.id, b.role);
    if (!inserted) {
      if (it->second != b.role) {
        fail(ErrorKind::RolePartitionViolation,
             bus_label(b.id) + " declared as both " + std::string(to_string(it->second)) +
                 " and " + std::string(to_string(b.role)));
      }
      fail(ErrorKind::InvalidParameter, bus_label(b.id) + " declared twice");
    }
    if (!positive(b.voltage)) fail(ErrorKind::InvalidParameter, bus_label(b.id) + ": voltage must be > 0");
    if (!std::isfinite(b.injection)) fail(ErrorKind::InvalidParameter, bus_label(b.id) + ": injection not finite");
  }
  if (buses_.empty()) fail(ErrorKind::InvalidParameter, "network has no buses");

  std::set<std::pair<int, int>> pairs;
  for (const Line& l : lines_) {
    if (!roles.contains(l.from) || !roles.contains(l.to)) {
      fail(ErrorKind::UnknownBusReference,
           "line " + std::to_string(l.from) + "-" + std::to_string(l.to) + " references an unknown bus");
    }
    if (l.from == l.to) fail(ErrorKind::InvalidParameter, "self-loop at " + bus_label(l.from));
    if (!positive(l.susceptance)) {
      fail(ErrorKind::InvalidParameter,
           "line " + std::to_string(l.from) + "-" + std::to_string(l.to) + ": susceptance must be > 0");
    }
    if (!pairs.emplace(std::minmax(l.from, l.to)).second) {
      fail(ErrorKind::InvalidParameter,
           "parallel line " + std::to_string(l.from) + "-" + std::to_string(l.to));
    }
  }

  std::set<int> gen_buses;
  for (const GeneratorParams& g : generators_) {
    auto it = roles.find(g.bus);
    if (it == roles.end()) fail(ErrorKind::UnknownBusReference, "generator at unknown " + bus_label(g.bus));
    if (!g.in_service) continue;
    if (it->second != BusRole::Generator) {
      fail(ErrorKind::RolePartitionViolation,
           bus_label(g.bus) + " carries generator data but is " + std::string(to_string(it->second)));
    }
    if (!gen_buses.insert(g.bus).second) fail(ErrorKind::InvalidParameter, "two generators at " + bus_label(g.bus));
    if (!positive(g.inertia)) fail(ErrorKind::InvalidParameter, bus_label(g.bus) + ": inertia must be > 0");
    if (!positive(g.damping)) fail(ErrorKind::InvalidParameter, bus_label(g.bus) + ": damping must be > 0");
    if (!(g.governor_droop >= 0.0)) fail(ErrorKind::InvalidParameter, bus_label(g.bus) + ": governor droop must be >= 0");
    if (!positive(g.cost_beta)) fail(ErrorKind::InvalidParameter, bus_label(g.bus) + ": beta must be > 0");
  }

  std::set<int> lcc_buses;
  std::set<std::string> names;
  for (const LccParams& c : lccs_) {
    auto it = roles.find(c.bus);
    if (it == roles.end()) fail(ErrorKind::UnknownBusReference, "LCC " + c.name + " at unknown " + bus_label(c.bus));
    if (!names.insert(c.name).second) fail(ErrorKind::InvalidParameter, "duplicate LCC name " + c.name);
    if (!c.in_service) continue;
    if (it->second != BusRole::LccConnected) {
      fail(ErrorKind::RolePartitionViolation,
           bus_label(c.bus) + " carries LCC " + c.name + " but is " + std::string(to_string(it->second)));
    }
    if (!lcc_buses.insert(c.bus).second) {
      fail(ErrorKind::DuplicateLccAttachment, bus_label(c.bus) + " has more than one LCC attached");
    }
    const double mag = std::abs(c.nominal);
    if (!(c.lower >= 0.0 && c.lower <= mag && mag <= c.upper)) {
      fail(ErrorKind::InvalidParameter, "LCC " + c.name + ": bounds must satisfy lower <= |nominal| <= upper");
    }
    if (!(c.time_constant >= 0.0)) fail(ErrorKind::InvalidParameter, "LCC " + c.name + ": time constant must be >= 0");
    if (c.alpha && !positive(*c.alpha)) fail(ErrorKind::InvalidParameter, "LCC " + c.name + ": alpha must be > 0");
    if (c.cost_e && !positive(*c.cost_e)) fail(ErrorKind::InvalidParameter, "LCC " + c.name + ": e must be > 0");
    if (c.adjacent_regulation && !positive(*c.adjacent_regulation)) {
      fail(ErrorKind::InvalidParameter, "LCC " + c.name + ": K^f must be > 0");
    }
    if (!(c.dc_voltage_kv >= 0.0)) fail(ErrorKind::InvalidParameter, "LCC " + c.name + ": DC voltage must be >= 0");
  }

  for (const Bus& b : buses_) {
    if (b.role == BusRole::Generator && !gen_buses.contains(b.id)) {
      fail(ErrorKind::MissingParameters, bus_label(b.id) + " is a generator bus without generator data");
    }
    if (b.role == BusRole::LccConnected && !lcc_buses.contains(b.id)) {
      fail(ErrorKind::MissingParameters, bus_label(b.id) + " is LCC-connected without an LCC record");
    }
  }
  if (gen_buses.empty()) fail(ErrorKind::MissingParameters, "network needs at least one generator bus");

  // connectivity
  std::map<int, std::vector<int>> adj;
  for (const Line& l : lines_) {
    adj[l.from].push_back(l.to);
    adj[l.to].push_back(l.from);
  }
  std::set<int> seen{buses_.front().id};
  std::queue<int> frontier;
  frontier.push(buses_.front().id);
  while (!frontier.empty()) {
    int u = frontier.front();
    frontier.pop();
    for (int v : adj[u]) {
      if (seen.insert(v).second) frontier.push(v);
    }
  }
  if (seen.size() != buses_.size()) {
    fail(ErrorKind::DisconnectedGraph, "network graph is not connected (" + std::to_string(seen.size()) + " of " +
                                           std::to_string(buses_.size()) + " buses reachable)");
  }
  if (!positive(bases_.power_mva) || !positive(bases_.frequency_hz)) {
    fail(ErrorKind::InvalidParameter, "bases must be positive");
  }
}

void Network::rebuild() {
  index_by_id_.clear();
  for (std::size_t i = 0; i < buses_.size(); ++i) index_by_id_[buses_[i].id] = i;

  endpoints_.clear();
  effective_b_.clear();
  adjacency_.assign(buses_.size(), {});
  for (std::size_t l = 0; l < lines_.size(); ++l) {
    std::size_t i = index_of(lines_[l].from);
    std::size_t j = index_of(lines_[l].to);
    endpoints_.emplace_back(i, j);
    effective_b_.push_back(lines_[l].susceptance * buses_[i].voltage * buses_[j].voltage);
    adjacency_[i].push_back({l, j});
    adjacency_[j].push_back({l, i});
  }

  gen_of_bus_.assign(buses_.size(), std::nullopt);
  lcc_of_bus_.assign(buses_.size(), std::nullopt);
  for (std::size_t g = 0; g < generators_.size(); ++g) {
    if (generators_[g].in_service) gen_of_bus_[index_of(generators_[g].bus)] = g;
  }
  for (std::size_t c = 0; c < lccs_.size(); ++c) {
    if (lccs_[c].in_service) lcc_of_bus_[index_of(lccs_[c].bus)] = c;
  }

  std::optional<std::size_t> ref;
  for (std::size_t i = 0; i < buses_.size(); ++i) {
    if (buses_[i].role != BusRole::Generator) continue;
    if (!ref || buses_[i].id < buses_[*ref].id) ref = i;
  }
  reference_ = ref.value_or(0);
}

std::size_t Network::index_of(int bus_id) const {
  auto it = index_by_id_.find(bus_id);
  if (it == index_by_id_.end()) fail(ErrorKind::UnknownBusReference, "unknown " + bus_label(bus_id));
  return it->second;
}

bool Network::has_bus(int bus_id) const { return index_by_id_.contains(bus_id); }

std::size_t Network::lcc_index(std::string_view name) const {
  for (std::size_t c = 0; c < lccs_.size(); ++c) {
    if (lccs_[c].name == name) return c;
  }
  fail(ErrorKind::UnknownBusReference, "unknown LCC " + std::string(name));
}

std::optional<std::size_t> Network::generator_at(std::size_t bus) const { return gen_of_bus_[bus]; }
std::optional<std::size_t> Network::lcc_at(std::size_t bus) const { return lcc_of_bus_[bus]; }

double Network::total_injection() const {
  double s = 0.0;
  for (const Bus& b : buses_) s += b.injection;
  return s;
}

double Network::total_lcc_nominal() const {
  double s = 0.0;
  for (const LccParams& c : lccs_) {
    if (c.in_service) s += c.nominal;
  }
  return s;
}

std::size_t Network::count(BusRole role) const {
  return static_cast<std::size_t>(
      std::count_if(buses_.begin(), buses_.end(), [role](const Bus& b) { return b.role == role; }));
}

Network Network::with_generator_tripped(int bus_id) const {
  Network next = *this;
  std::size_t i = index_of(bus_id);
  auto g = generator_at(i);
  if (!g) fail(ErrorKind::UnknownBusReference, bus_label(bus_id) + " has no in-service generator to trip");
  next.generators_[*g].in_service = false;
  next.buses_[i].role = BusRole::Passive;
  next.buses_[i].injection = 0.0;
  next.validate();
  next.rebuild();
  return next;
}

Network Network::with_dc_blocked(std::string_view lcc_name) const {
  Network next = *this;
  std::size_t c = lcc_index(lcc_name);
  if (!lccs_[c].in_service) return next;
  next.lccs_[c].in_service = false;
  next.buses_[index_of(lccs_[c].bus)].role = BusRole::Passive;
  next.validate();
  next.rebuild();
  return next;
}

Network Network::with_power_step(int bus_id, double delta) const {
  Network next = *this;
  next.buses_[index_of(bus_id)].injection += delta;
  next.rebuild();
  return next;
}

Network Network::with_lcc_time_constant(double time_constant) const {
  Network next = *this;
  for (LccParams& c : next.lccs_) c.time_constant = time_constant;
  next.validate();
  next.rebuild();
  return next;
}

Network Network::with_lcc_limits(double lower, double upper) const {
  Network next = *this;
  for (LccParams& c : next.lccs_) {
    c.lower = lower;
    c.upper = upper;
  }
  next.validate();
  next.rebuild();
  return next;
}

Network build_network(std::vector<Bus> buses, std::vector<Line> lines, std::vector<GeneratorParams> generators,
                      std::vector<LccParams> lccs, Bases bases) {
  Network net;
  net.buses_ = std::move(buses);
  net.lines_ = std::move(lines);
  net.generators_ = std::move(generators);
  net.lccs_ = std::move(lccs);
  net.bases_ = bases;
  net.validate();
  net.rebuild();
  return net;
}

double effective_susceptance(const Line& line, const Network& network) {
  const Bus& a = network.bus(network.index_of(line.from));
  const Bus& b = network.bus(network.index_of(line.to));
  return line.susceptance * a.voltage * b.voltage;
}

}  // namespace midc
