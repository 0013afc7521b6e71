#include "midc/scenario.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "midc/error.hpp"

namespace midc {

namespace {

// ---------------------------------------------------------------------------
// Tokenizer: sections of either `key = value` lines or rows of `key=value`
// tokens, '#' starts a comment.

constexpr std::array kKeyValueSections{std::string_view{"network"}, std::string_view{"control"}};
constexpr std::array kTableSections{std::string_view{"buses"}, std::string_view{"generators"},
                                    std::string_view{"lccs"}, std::string_view{"lines"},
                                    std::string_view{"events"}};

struct Field {
  int line = 0;
  std::string key;
  std::string value;
};

struct Row {
  int line = 0;
  std::vector<Field> fields;
};

struct Section {
  std::string name;
  std::vector<Field> entries;  // key/value sections
  std::vector<Row> rows;       // table sections
};

struct Document {
  std::vector<Section> sections;

  const Section* find(std::string_view name) const {
    for (const Section& s : sections) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }
};

[[noreturn]] void parse_fail(int line, const std::string& what) {
  fail(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_one_of(std::string_view name, auto const& list) {
  return std::find(list.begin(), list.end(), name) != list.end();
}

Document tokenize(std::string_view text) {
  Document doc;
  Section* current = nullptr;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::string_view line = trim(raw);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(line_no, "unterminated section header");
      std::string name(trim(line.substr(1, line.size() - 2)));
      if (!is_one_of(name, kKeyValueSections) && !is_one_of(name, kTableSections)) {
        parse_fail(line_no, "unknown section [" + name + "]");
      }
      if (doc.find(name)) parse_fail(line_no, "section [" + name + "] repeated");
      doc.sections.push_back({name, {}, {}});
      current = &doc.sections.back();
      continue;
    }
    if (!current) parse_fail(line_no, "content before the first section header");

    if (is_one_of(current->name, kKeyValueSections)) {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) parse_fail(line_no, "expected 'key = value'");
      std::string key(trim(line.substr(0, eq)));
      std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) parse_fail(line_no, "empty key");
      for (const Field& f : current->entries) {
        if (f.key == key) parse_fail(line_no, "duplicate key '" + key + "'");
      }
      current->entries.push_back({line_no, key, value});
    } else {
      Row row{line_no, {}};
      std::size_t p = 0;
      while (p < line.size()) {
        std::size_t q = line.find_first_of(" \t", p);
        if (q == std::string_view::npos) q = line.size();
        std::string_view tok = line.substr(p, q - p);
        p = line.find_first_not_of(" \t", q);
        if (p == std::string_view::npos) p = line.size();
        if (tok.empty()) continue;
        auto eq = tok.find('=');
        if (eq == std::string_view::npos || eq == 0) parse_fail(line_no, "expected key=value token, got '" + std::string(tok) + "'");
        std::string key(tok.substr(0, eq));
        for (const Field& f : row.fields) {
          if (f.key == key) parse_fail(line_no, "duplicate field '" + key + "'");
        }
        row.fields.push_back({line_no, key, std::string(tok.substr(eq + 1))});
      }
      current->rows.push_back(std::move(row));
    }
  }
  return doc;
}

double to_double(const Field& f) {
  double v = 0.0;
  const char* b = f.value.data();
  const char* e = b + f.value.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e) parse_fail(f.line, "field '" + f.key + "': '" + f.value + "' is not a number");
  return v;
}

int to_int(const Field& f) {
  int v = 0;
  const char* b = f.value.data();
  const char* e = b + f.value.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e) parse_fail(f.line, "field '" + f.key + "': '" + f.value + "' is not an integer");
  return v;
}

// Typed accessor over one row (or key/value section) that tracks which
// fields were consumed so leftovers can be reported.
class Fields {
 public:
  Fields(int line, const std::vector<Field>& fields) : line_(line), fields_(fields), used_(fields.size(), false) {}

  const Field* find(std::string_view key) {
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      if (fields_[i].key == key) {
        used_[i] = true;
        return &fields_[i];
      }
    }
    return nullptr;
  }

  const Field& require(std::string_view key) {
    if (const Field* f = find(key)) return *f;
    parse_fail(line_, "missing field '" + std::string(key) + "'");
  }

  std::optional<double> number(std::string_view key) {
    if (const Field* f = find(key)) return to_double(*f);
    return std::nullopt;
  }

  /// A quantity given either in p.u. (`key`) or with a unit suffix that
  /// converts to p.u. by dividing by `scale`.
  std::optional<double> quantity(std::string_view key, std::string_view suffixed, double scale) {
    const Field* a = find(key);
    const Field* b = find(suffixed);
    if (a && b) parse_fail(a->line, "give either '" + std::string(key) + "' or '" + std::string(suffixed) + "', not both");
    if (a) return to_double(*a);
    if (b) return to_double(*b) / scale;
    return std::nullopt;
  }

  double require_quantity(std::string_view key, std::string_view suffixed, double scale) {
    if (auto v = quantity(key, suffixed, scale)) return *v;
    parse_fail(line_, "missing field '" + std::string(suffixed) + "' (or '" + std::string(key) + "')");
  }

  /// Keys of the form `prefix.suffix`.
  std::vector<const Field*> with_prefix(std::string_view prefix) {
    std::vector<const Field*> out;
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      if (fields_[i].key.starts_with(prefix)) {
        used_[i] = true;
        out.push_back(&fields_[i]);
      }
    }
    return out;
  }

  void finish() const {
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      if (!used_[i]) parse_fail(fields_[i].line, "unknown field '" + fields_[i].key + "'");
    }
  }

 private:
  int line_;
  const std::vector<Field>& fields_;
  std::vector<bool> used_;
};

BusRole parse_role(const Field& f) {
  if (f.value == "generator") return BusRole::Generator;
  if (f.value == "lcc") return BusRole::LccConnected;
  if (f.value == "passive") return BusRole::Passive;
  parse_fail(f.line, "field 'role': expected generator|lcc|passive, got '" + f.value + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::FileNotFound, "scenario not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Network parse_network(const Document& doc, const std::filesystem::path& base_dir) {
  Bases bases;
  if (const Section* s = doc.find("network")) {
    Fields kv(0, s->entries);
    kv.find("name");
    if (const Field* inc = kv.find("include")) {
      for (auto name : kTableSections) {
        if (name != "events" && doc.find(name)) {
          parse_fail(inc->line, "a case with 'include' cannot also define [" + std::string(name) + "]");
        }
      }
      kv.finish();
      std::filesystem::path target = base_dir / inc->value;
      return load_network(read_file(target), target.parent_path());
    }
    if (auto v = kv.number("base_mva")) bases.power_mva = *v;
    if (auto v = kv.number("f_nominal_hz")) bases.frequency_hz = *v;
    kv.finish();
  }
  const double mva = bases.power_mva;

  std::vector<Bus> buses;
  if (const Section* s = doc.find("buses")) {
    for (const Row& r : s->rows) {
      Fields f(r.line, r.fields);
      Bus b;
      b.id = to_int(f.require("id"));
      b.role = parse_role(f.require("role"));
      b.injection = f.quantity("p", "p_mw", mva).value_or(0.0);
      b.voltage = f.number("v").value_or(1.0);
      f.finish();
      buses.push_back(b);
    }
  }

  std::vector<GeneratorParams> gens;
  if (const Section* s = doc.find("generators")) {
    for (const Row& r : s->rows) {
      Fields f(r.line, r.fields);
      GeneratorParams g;
      g.bus = to_int(f.require("bus"));
      g.inertia = to_double(f.require("m"));
      g.damping = to_double(f.require("d"));
      g.governor_droop = to_double(f.require("kbar"));
      g.cost_beta = to_double(f.require("beta"));
      f.finish();
      gens.push_back(g);
    }
  }

  std::vector<LccParams> lccs;
  if (const Section* s = doc.find("lccs")) {
    for (const Row& r : s->rows) {
      Fields f(r.line, r.fields);
      LccParams c;
      c.name = f.require("name").value;
      c.bus = to_int(f.require("bus"));
      c.nominal = f.require_quantity("pd", "pd_mw", mva);
      c.upper = f.require_quantity("pmax", "pmax_mw", mva);
      c.lower = f.require_quantity("pmin", "pmin_mw", mva);
      c.time_constant = f.number("td_s").value_or(0.1);
      c.alpha = f.number("alpha");
      c.adjacent_regulation = f.number("kf");
      c.cost_e = f.number("e");
      c.dc_voltage_kv = f.number("ud_kv").value_or(0.0);
      f.finish();
      lccs.push_back(c);
    }
  }

  std::vector<Line> lines;
  if (const Section* s = doc.find("lines")) {
    for (const Row& r : s->rows) {
      Fields f(r.line, r.fields);
      Line l;
      l.from = to_int(f.require("from"));
      l.to = to_int(f.require("to"));
      auto b = f.number("b");
      auto x = f.number("x");
      if (b && x) parse_fail(r.line, "give either 'b' or 'x', not both");
      if (x) {
        if (!(*x > 0.0)) parse_fail(r.line, "field 'x' must be > 0");
        l.susceptance = 1.0 / *x;
      } else if (b) {
        l.susceptance = *b;
      } else {
        parse_fail(r.line, "missing field 'b' (or 'x')");
      }
      f.finish();
      lines.push_back(l);
    }
  }

  return build_network(std::move(buses), std::move(lines), std::move(gens), std::move(lccs), bases);
}

bool parse_switch(const Field& f) {
  if (f.value == "on" || f.value == "true" || f.value == "1") return true;
  if (f.value == "off" || f.value == "false" || f.value == "0") return false;
  parse_fail(f.line, "field '" + f.key + "': expected on|off");
}

Scenario parse_scenario(const Document& doc, const Network& network) {
  Scenario sc;
  const double mva = network.bases().power_mva;
  const double hz = network.bases().frequency_hz;

  if (const Section* s = doc.find("network")) {
    for (const Field& f : s->entries) {
      if (f.key == "name") sc.name = f.value;
    }
  }

  if (const Section* s = doc.find("events")) {
    for (const Row& r : s->rows) {
      Fields f(r.line, r.fields);
      Event ev;
      ev.time = to_double(f.require("t_s"));
      if (!(ev.time >= 0.0)) parse_fail(r.line, "event time must be >= 0");
      const Field& kind = f.require("kind");
      if (kind.value == "generator_trip") {
        int bus = to_int(f.require("bus"));
        if (!network.has_bus(bus) || !network.generator_at(network.index_of(bus))) {
          fail(ErrorKind::UnknownBusReference,
               "line " + std::to_string(r.line) + ": generator_trip references bus " + std::to_string(bus) +
                   " which has no generator");
        }
        ev.action = GeneratorTrip{bus};
      } else if (kind.value == "dc_block") {
        std::string name = f.require("lcc").value;
        bool known = std::any_of(network.lccs().begin(), network.lccs().end(),
                                 [&](const LccParams& c) { return c.name == name; });
        if (!known) {
          fail(ErrorKind::UnknownBusReference,
               "line " + std::to_string(r.line) + ": dc_block references unknown LCC '" + name + "'");
        }
        ev.action = DcBlock{name};
      } else if (kind.value == "power_step") {
        int bus = to_int(f.require("bus"));
        if (!network.has_bus(bus)) {
          fail(ErrorKind::UnknownBusReference,
               "line " + std::to_string(r.line) + ": power_step references unknown bus " + std::to_string(bus));
        }
        ev.action = PowerStep{bus, f.require_quantity("delta", "delta_mw", mva)};
      } else {
        parse_fail(kind.line, "field 'kind': expected generator_trip|dc_block|power_step, got '" + kind.value + "'");
      }
      f.finish();
      sc.events.push_back(std::move(ev));
    }
  }
  std::stable_sort(sc.events.begin(), sc.events.end(),
                   [](const Event& a, const Event& b) { return a.time < b.time; });

  if (const Section* s = doc.find("control")) {
    Fields kv(0, s->entries);
    ControlConfig& c = sc.control;
    if (auto v = kv.number("horizon_s")) sc.horizon = *v;
    if (auto v = kv.number("step_s")) sc.step = *v;
    if (auto v = kv.number("output_s")) sc.output_interval = *v;
    if (auto v = kv.quantity("dead_zone_pu", "dead_zone_hz", hz)) c.dead_zone = *v;
    if (const Field* f = kv.find("objective")) {
      if (f->value == "1" || f->value == "I") {
        c.objective = Objective::I;
      } else if (f->value == "2" || f->value == "II") {
        c.objective = Objective::II;
      } else {
        parse_fail(f->line, "field 'objective': expected 1|2");
      }
    }
    if (const Field* f = kv.find("droop")) {
      if (f->value == "optimal") {
        c.droop = DroopSource::Optimal;
      } else if (f->value == "average") {
        c.droop = DroopSource::Average;
      } else if (f->value == "manual") {
        c.droop = DroopSource::Manual;
      } else {
        parse_fail(f->line, "field 'droop': expected optimal|average|manual");
      }
    }
    if (const Field* f = kv.find("margin")) {
      if (f->value == "increase") {
        c.margin = MarginDirection::Increase;
      } else if (f->value == "decrease") {
        c.margin = MarginDirection::Decrease;
      } else {
        parse_fail(f->line, "field 'margin': expected increase|decrease");
      }
    }
    if (const Field* f = kv.find("lcc_droop")) c.lcc_droop = parse_switch(*f);
    if (auto v = kv.number("lyapunov_d_scale")) c.lyapunov_d_scale = *v;
    for (const Field* f : kv.with_prefix("kd.")) {
      std::string name = f->key.substr(3);
      bool known = std::any_of(network.lccs().begin(), network.lccs().end(),
                               [&](const LccParams& l) { return l.name == name; });
      if (!known) {
        fail(ErrorKind::UnknownBusReference, "line " + std::to_string(f->line) + ": unknown LCC '" + name + "'");
      }
      c.manual_lcc[name] = to_double(*f);
    }
    for (const Field* f : kv.with_prefix("kg.")) {
      Field id{f->line, f->key, f->key.substr(3)};
      int bus = to_int(id);
      if (!network.has_bus(bus) || network.bus(network.index_of(bus)).role != BusRole::Generator) {
        fail(ErrorKind::UnknownBusReference,
             "line " + std::to_string(f->line) + ": bus " + std::to_string(bus) + " has no generator");
      }
      c.manual_generator[bus] = to_double(*f);
    }
    kv.finish();
    if (!(c.dead_zone >= 0.0)) fail(ErrorKind::InvalidParameter, "dead zone must be >= 0");
    if (!(c.lyapunov_d_scale > 0.0)) fail(ErrorKind::InvalidParameter, "lyapunov_d_scale must be > 0");
  }
  if (!(sc.step > 0.0) || !(sc.horizon > 0.0) || !(sc.output_interval > 0.0)) {
    fail(ErrorKind::InvalidParameter, "horizon, step and output interval must be > 0");
  }
  return sc;
}

std::string fmt(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace

std::string describe(const EventAction& action) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, GeneratorTrip>) {
          return "generator_trip bus=" + std::to_string(a.bus);
        } else if constexpr (std::is_same_v<T, DcBlock>) {
          return "dc_block lcc=" + a.lcc;
        } else {
          return "power_step bus=" + std::to_string(a.bus) + " delta=" + fmt(a.delta);
        }
      },
      action);
}

Network load_network(std::string_view text, const std::filesystem::path& base_dir) {
  return parse_network(tokenize(text), base_dir);
}

Scenario load_scenario(std::string_view text, const Network& network) {
  return parse_scenario(tokenize(text), network);
}

Case load_case(std::string_view text, const std::filesystem::path& base_dir) {
  Document doc = tokenize(text);
  Network net = parse_network(doc, base_dir);
  Scenario sc = parse_scenario(doc, net);
  return {std::move(net), std::move(sc)};
}

Case load_case_file(const std::filesystem::path& path) {
  std::string text = read_file(path);
  Case c = load_case(text, path.parent_path());
  if (c.scenario.name.empty()) c.scenario.name = path.stem().string();
  return c;
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream out;
  out << "[network]\n";
  if (!sc.name.empty()) out << "name = " << sc.name << "\n";
  out << "\n[events]\n";
  for (const Event& ev : sc.events) {
    out << "t_s=" << fmt(ev.time) << " ";
    std::visit(
        [&](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, GeneratorTrip>) {
            out << "kind=generator_trip bus=" << a.bus;
          } else if constexpr (std::is_same_v<T, DcBlock>) {
            out << "kind=dc_block lcc=" << a.lcc;
          } else {
            out << "kind=power_step bus=" << a.bus << " delta=" << fmt(a.delta);
          }
        },
        ev.action);
    out << "\n";
  }
  const ControlConfig& c = sc.control;
  out << "\n[control]\n";
  out << "horizon_s = " << fmt(sc.horizon) << "\n";
  out << "step_s = " << fmt(sc.step) << "\n";
  out << "output_s = " << fmt(sc.output_interval) << "\n";
  out << "dead_zone_pu = " << fmt(c.dead_zone) << "\n";
  out << "objective = " << (c.objective == Objective::I ? "1" : "2") << "\n";
  out << "droop = "
      << (c.droop == DroopSource::Optimal ? "optimal" : c.droop == DroopSource::Average ? "average" : "manual")
      << "\n";
  out << "margin = " << (c.margin == MarginDirection::Increase ? "increase" : "decrease") << "\n";
  out << "lcc_droop = " << (c.lcc_droop ? "on" : "off") << "\n";
  out << "lyapunov_d_scale = " << fmt(c.lyapunov_d_scale) << "\n";
  for (const auto& [name, k] : c.manual_lcc) out << "kd." << name << " = " << fmt(k) << "\n";
  for (const auto& [bus, k] : c.manual_generator) out << "kg." << bus << " = " << fmt(k) << "\n";
  return out.str();
}

}  // namespace midc
