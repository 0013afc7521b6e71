#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace midc {

enum class BusRole { Generator, LccConnected, Passive };

std::string_view to_string(BusRole role);

struct Bus {
  int id = 0;
  BusRole role = BusRole::Passive;
  double injection = 0.0;  // p.u.; positive = injection, negative = demand
  double voltage = 1.0;    // p.u., held constant
};

struct Line {
  int from = 0;
  int to = 0;
  double susceptance = 0.0;  // base susceptance, p.u.
};

struct GeneratorParams {
  int bus = 0;
  double inertia = 0.0;         // M
  double damping = 0.0;         // D
  double governor_droop = 0.0;  // governor gain, excluding damping
  double cost_beta = 0.0;
  bool in_service = true;
};

/// One LCC-HVDC link attached to the main AC system.
///
/// `nominal` is signed: positive when the main system is the receiving end,
/// negative when it is the sending end. `upper`/`lower` bound the magnitude of
/// the transmitted power, as in the usual link rating tables. A zero
/// `time_constant` selects the instantaneous-converter limit.
struct LccParams {
  std::string name;
  int bus = 0;
  double nominal = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  double time_constant = 0.1;
  std::optional<double> alpha;                // objective I cost weight
  std::optional<double> adjacent_regulation;  // K^f of the adjacent system
  std::optional<double> cost_e;               // objective II cost weight
  double dc_voltage_kv = 0.0;
  bool in_service = true;

  double direction() const { return nominal < 0.0 ? -1.0 : 1.0; }
  /// Bounds on the signed power delivered into the main system.
  double signed_lower() const { return nominal < 0.0 ? -upper : lower; }
  double signed_upper() const { return nominal < 0.0 ? -lower : upper; }
};

struct Bases {
  double power_mva = 100.0;
  double frequency_hz = 50.0;
};

struct Incidence {
  std::size_t line;
  std::size_t neighbor;
};

/// Validated, immutable description of a hybrid AC-DC network.
///
/// Buses are stored in the order given; `index_of` maps external ids to that
/// order. Line susceptances are cached in effective form (B * Vi * Vj).
class Network {
 public:
  std::size_t bus_count() const { return buses_.size(); }
  std::size_t line_count() const { return lines_.size(); }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<GeneratorParams>& generators() const { return generators_; }
  const std::vector<LccParams>& lccs() const { return lccs_; }
  const Bases& bases() const { return bases_; }

  const Bus& bus(std::size_t index) const { return buses_[index]; }
  std::size_t index_of(int bus_id) const;
  bool has_bus(int bus_id) const;
  std::size_t lcc_index(std::string_view name) const;

  std::size_t line_from(std::size_t line) const { return endpoints_[line].first; }
  std::size_t line_to(std::size_t line) const { return endpoints_[line].second; }
  double line_susceptance(std::size_t line) const { return effective_b_[line]; }
  std::span<const Incidence> incident(std::size_t bus) const { return adjacency_[bus]; }

  /// In-service generator / LCC record attached to a bus index, if any.
  std::optional<std::size_t> generator_at(std::size_t bus) const;
  std::optional<std::size_t> lcc_at(std::size_t bus) const;

  /// Lowest-id in-service generator bus; angles are expressed relative to it.
  std::size_t reference_bus() const { return reference_; }

  double total_injection() const;
  double total_lcc_nominal() const;

  std::size_t count(BusRole role) const;

  Network with_generator_tripped(int bus_id) const;
  Network with_dc_blocked(std::string_view lcc_name) const;
  Network with_power_step(int bus_id, double delta) const;
  Network with_lcc_time_constant(double time_constant) const;
  /// Replaces every link's order range (magnitudes).
  Network with_lcc_limits(double lower, double upper) const;

  /// Re-runs every structural check; throws on violation.
  void validate() const;

 private:
  friend Network build_network(std::vector<Bus>, std::vector<Line>, std::vector<GeneratorParams>,
                               std::vector<LccParams>, Bases);
  void rebuild();

  std::vector<Bus> buses_;
  std::vector<Line> lines_;
  std::vector<GeneratorParams> generators_;
  std::vector<LccParams> lccs_;
  Bases bases_;

  std::unordered_map<int, std::size_t> index_by_id_;
  std::vector<std::pair<std::size_t, std::size_t>> endpoints_;
  std::vector<double> effective_b_;
  std::vector<std::vector<Incidence>> adjacency_;
  std::vector<std::optional<std::size_t>> gen_of_bus_;
  std::vector<std::optional<std::size_t>> lcc_of_bus_;
  std::size_t reference_ = 0;
};

Network build_network(std::vector<Bus> buses, std::vector<Line> lines,
                      std::vector<GeneratorParams> generators, std::vector<LccParams> lccs,
                      Bases bases = {});

/// B_ij = B̄_ij V_i V_j for a line of `network`.
double effective_susceptance(const Line& line, const Network& network);

}  // namespace midc
