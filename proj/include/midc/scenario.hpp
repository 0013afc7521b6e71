#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "midc/grid.hpp"

namespace midc {

struct GeneratorTrip {
  int bus = 0;
  bool operator==(const GeneratorTrip&) const = default;
};

struct DcBlock {
  std::string lcc;
  bool operator==(const DcBlock&) const = default;
};

struct PowerStep {
  int bus = 0;
  double delta = 0.0;  // p.u.
  bool operator==(const PowerStep&) const = default;
};

using EventAction = std::variant<GeneratorTrip, DcBlock, PowerStep>;

struct Event {
  double time = 0.0;  // s
  EventAction action;
  bool operator==(const Event&) const = default;
};

std::string describe(const EventAction& action);

enum class Objective { I, II };
enum class DroopSource { Optimal, Average, Manual };
enum class MarginDirection { Increase, Decrease };

struct ControlConfig {
  double dead_zone = 0.0;  // p.u. frequency deviation; 0 disables
  Objective objective = Objective::I;
  DroopSource droop = DroopSource::Optimal;
  MarginDirection margin = MarginDirection::Increase;
  bool lcc_droop = true;
  std::map<std::string, double> manual_lcc;  // k^D overrides by LCC name
  std::map<int, double> manual_generator;    // k^G overrides by bus id
  double lyapunov_d_scale = 1.0;             // d_i = scale / k_i^D

  bool operator==(const ControlConfig&) const = default;
};

struct Scenario {
  std::string name;
  std::vector<Event> events;  // sorted by time
  ControlConfig control;
  double horizon = 30.0;         // s
  double step = 1e-3;            // s
  double output_interval = 1e-2; // s

  bool operator==(const Scenario&) const = default;
};

/// A network plus the scenario that drives it; what a case file describes.
struct Case {
  Network network;
  Scenario scenario;
};

/// Parses the network sections ([network], [buses], [generators], [lccs],
/// [lines]) of a case file. `base_dir` resolves `include = <file>`.
Network load_network(std::string_view text, const std::filesystem::path& base_dir = {});

/// Parses the scenario sections ([network] name, [events], [control]) and
/// checks every bus / LCC reference against `network`.
Scenario load_scenario(std::string_view text, const Network& network);

Case load_case(std::string_view text, const std::filesystem::path& base_dir = {});
Case load_case_file(const std::filesystem::path& path);

/// Writes the scenario sections in p.u. keys; parsing the output with the
/// same network yields an equal Scenario.
std::string serialize_scenario(const Scenario& scenario);

}  // namespace midc
