#include "midc/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "midc/dynamics.hpp"
#include "midc/oefc.hpp"
#include "midc/trajectory_io.hpp"
#include "midc/verify.hpp"

namespace midc {

void ReportBody::add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }

void ReportBody::add(std::string key, double value) { add(std::move(key), format_number(value)); }

std::string format_number(double value) {
  if (value == 0.0) return "0";  // no "-0"
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

double round_half_up(double value, int decimals) {
  double scale = std::pow(10.0, decimals);
  double x = std::abs(value) * scale;
  x = std::floor(x * (1.0 + 1e-12) + 0.5);
  return std::copysign(x / scale, value);
}

namespace {

std::string fixed2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", round_half_up(v, 2));
  return buf;
}

std::string utc_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

nlohmann::ordered_json to_json(const ReportBody& body) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : body.entries) {
    double num = 0.0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), num);
    if (ec == std::errc{} && p == v.data() + v.size()) {
      j[k] = num;
    } else {
      j[k] = v;
    }
  }
  return j;
}

std::filesystem::path prepare_out(const CommandOptions& o) {
  std::filesystem::create_directories(*o.out);
  return *o.out;
}

void write_json(const std::filesystem::path& path, const ReportBody& body) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::FileNotFound, "cannot write " + path.string());
  f << to_json(body).dump(2) << '\n';
}

std::string case_name(const Case& c) { return c.scenario.name.empty() ? "case" : c.scenario.name; }

void add_allocations(ReportBody& body, const Network& net, const Sample& s) {
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    if (net.generators()[g].in_service) body.add("u_G." + std::to_string(net.generators()[g].bus), s.u_generator[g]);
  }
  for (std::size_t c = 0; c < net.lccs().size(); ++c) {
    if (net.lccs()[c].in_service) body.add("u_D." + net.lccs()[c].name, s.u_lcc[c]);
  }
}

void add_costs(ReportBody& body, const Network& net, const Sample& s, MarginDirection margin) {
  for (Objective obj : {Objective::I, Objective::II}) {
    std::string key = obj == Objective::I ? "cost.objective_1" : "cost.objective_2";
    try {
      OefcProblem p = make_oefc_problem(net, obj, margin);
      std::vector<double> ug;
      std::vector<double> ud;
      for (std::size_t g : p.generator_records) ug.push_back(s.u_generator[g]);
      for (std::size_t c : p.lcc_records) ud.push_back(s.u_lcc[c]);
      body.add(key, total_cost(p, ug, ud));
    } catch (const Error& e) {
      body.add(key, std::string("n/a (") + std::string(to_string(e.kind())) + ")");
    }
  }
}

}  // namespace

void write_report(std::ostream& out, const std::string& command, const ReportBody& body, ReportFormat format) {
  out << "# midc " << command << " " << utc_timestamp() << '\n';
  if (format == ReportFormat::Text) {
    for (const auto& [k, v] : body.entries) out << k << ": " << v << '\n';
  } else {
    out << "key,value\n";
    for (const auto& [k, v] : body.entries) out << csv_field(k) << ',' << csv_field(v) << '\n';
  }
}

std::string error_record(std::string_view kind, std::string_view message, int exit_code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = exit_code;
  return j.dump();
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileNotFound: return 2;
    case ErrorKind::NewtonDivergence:
    case ErrorKind::InfeasibleFlow:
    case ErrorKind::SingularJacobian:
    case ErrorKind::UnsupportedRegime: return 3;
    default: return 4;
  }
}

Case load_with_overrides(const CommandOptions& o) {
  if (!std::filesystem::exists(o.scenario)) fail(ErrorKind::FileNotFound, "scenario not found: " + o.scenario.string());
  Case c = load_case_file(o.scenario);
  ControlConfig& ctl = c.scenario.control;
  if (o.objective) {
    if (*o.objective != 1 && *o.objective != 2) fail(ErrorKind::InvalidParameter, "--objective must be 1 or 2");
    ctl.objective = *o.objective == 1 ? Objective::I : Objective::II;
  }
  if (o.dead_zone_hz) {
    if (!(*o.dead_zone_hz >= 0.0)) fail(ErrorKind::InvalidParameter, "--dead-zone-hz must be >= 0");
    ctl.dead_zone = *o.dead_zone_hz / c.network.bases().frequency_hz;
  }
  if (o.droop) {
    if (*o.droop == "optimal") {
      ctl.droop = DroopSource::Optimal;
    } else if (*o.droop == "average") {
      ctl.droop = DroopSource::Average;
    } else if (*o.droop == "manual") {
      ctl.droop = DroopSource::Manual;
    } else {
      fail(ErrorKind::InvalidParameter, "--droop must be optimal, average or manual");
    }
  }
  return c;
}

int cmd_simulate(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  Case c = load_with_overrides(o);
  DroopCoefficients k = design_coefficients(c.network, c.scenario.control);
  Trajectory traj = simulate(c.network, c.scenario, k);
  const std::string name = case_name(c);

  ReportBody body;
  body.add("scenario", name);
  body.add("status", traj.failed ? "failed" : "ok");
  if (traj.failed) body.add("failure", std::string(to_string(traj.failure_kind)) + ": " + traj.failure);
  body.add("samples", static_cast<double>(traj.samples.size()));
  for (const EventMarker& e : traj.events) body.add("event." + format_number(e.time), e.description);
  if (!traj.samples.empty()) {
    TrajectorySummary sm = summarize(traj, c.network);
    const Network& net = traj.final_network ? *traj.final_network : c.network;
    body.add("terminal_frequency_hz", sm.terminal_hz);
    body.add("terminal_deviation_pu", sm.terminal_omega);
    body.add("nadir_deviation_pu", sm.nadir_omega);
    body.add("settling_time_s", sm.settling_time ? format_number(*sm.settling_time) : std::string("not settled"));
    add_allocations(body, net, traj.samples.back());
    add_costs(body, net, traj.samples.back(), c.scenario.control.margin);
    if (!traj.failed) {
      CheckResult ss = check_steady_state(traj, k, 1e-6);
      body.add("check.steady_state", std::string(to_string(ss.status)));
    }
  }
  if (o.out) {
    auto dir = prepare_out(o);
    auto csv = dir / (name + "_trajectory.csv");
    auto rep = dir / (name + "_report.json");
    std::ofstream f(csv);
    if (!f) fail(ErrorKind::FileNotFound, "cannot write " + csv.string());
    write_trajectory_csv(f, traj, c.network);
    body.add("trajectory_file", csv.string());
    body.add("report_file", rep.string());
    write_json(rep, body);
  }
  write_report(out, "simulate", body, o.format);
  if (traj.failed) {
    int code = exit_code_for(traj.failure_kind) == 3 ? 3 : exit_code_for(traj.failure_kind);
    err << error_record(to_string(traj.failure_kind), traj.failure, code) << '\n';
    return code;
  }
  return 0;
}

int cmd_design(const CommandOptions& o, std::ostream& out, std::ostream&) {
  Case c = load_with_overrides(o);
  const ControlConfig& ctl = c.scenario.control;
  DroopCoefficients k = design_coefficients(c.network, ctl);
  const Network& net = c.network;

  ReportBody body;
  body.add("scenario", case_name(c));
  body.add("objective", ctl.objective == Objective::I ? "1" : "2");
  body.add("droop", ctl.droop == DroopSource::Optimal ? "optimal" : ctl.droop == DroopSource::Average ? "average" : "manual");
  body.add("margin", ctl.margin == MarginDirection::Increase ? "increase" : "decrease");
  std::ostringstream csv;
  csv << "unit,kind,coefficient_pu,table_pu\n";
  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    std::string id = std::to_string(net.generators()[g].bus);
    body.add("kG." + id, k.generator[g]);
    body.add("kG." + id + ".table", fixed2(k.generator[g]));
    csv << id << ",generator," << format_number(k.generator[g]) << ',' << fixed2(k.generator[g]) << '\n';
  }
  for (std::size_t i = 0; i < net.lccs().size(); ++i) {
    const std::string& id = net.lccs()[i].name;
    body.add("kD." + id, k.lcc[i]);
    body.add("kD." + id + ".table", fixed2(k.lcc[i]));
    csv << id << ",lcc," << format_number(k.lcc[i]) << ',' << fixed2(k.lcc[i]) << '\n';
  }
  if (!k.lcc.empty()) body.add("kD.average", average_droop(k.lcc));
  if (o.out) {
    auto path = prepare_out(o) / (case_name(c) + "_design.csv");
    std::ofstream f(path);
    if (!f) fail(ErrorKind::FileNotFound, "cannot write " + path.string());
    f << csv.str();
    body.add("design_file", path.string());
  }
  write_report(out, "design", body, o.format);
  return 0;
}

int cmd_verify(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  Case c = load_with_overrides(o);
  VerifyReport rep = verify_case(c);
  ReportBody body;
  body.add("scenario", case_name(c));
  for (const CheckResult& r : rep.checks) {
    body.add("check." + r.name, std::string(to_string(r.status)));
    body.add("check." + r.name + ".detail", r.detail);
    for (const auto& [m, v] : r.metrics) body.add("check." + r.name + "." + m, v);
  }
  body.add("result", rep.ok() ? "pass" : "fail");
  if (o.out) {
    auto path = prepare_out(o) / (case_name(c) + "_verify.json");
    body.add("report_file", path.string());
    write_json(path, body);
  }
  write_report(out, "verify", body, o.format);
  if (!rep.ok()) {
    std::string failed;
    for (const CheckResult& r : rep.checks) {
      if (r.status == CheckStatus::Fail) failed += (failed.empty() ? "" : ", ") + r.name;
    }
    err << error_record("VerificationFailed", "failed checks: " + failed, 1) << '\n';
    return 1;
  }
  return 0;
}

int cmd_compare(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  Case c = load_with_overrides(o);
  CompareReport rep = compare_droop(c, c.scenario.control.objective);
  ReportBody body;
  body.add("scenario", case_name(c));
  body.add("objective", rep.objective == Objective::I ? "1" : "2");
  for (const auto* run : {&rep.optimal, &rep.average}) {
    std::string tag = run == &rep.optimal ? "optimal" : "average";
    const Network& net = *run->trajectory.final_network;
    for (std::size_t i = 0; i < net.lccs().size(); ++i) body.add(tag + ".kD." + net.lccs()[i].name, run->coefficients.lcc[i]);
    for (std::size_t g = 0; g < net.generators().size(); ++g) {
      body.add(tag + ".kG." + std::to_string(net.generators()[g].bus), run->coefficients.generator[g]);
    }
    body.add(tag + ".terminal_deviation_pu", run->terminal_omega);
    const Sample& last = run->trajectory.samples.back();
    for (std::size_t g = 0; g < net.generators().size(); ++g) {
      if (net.generators()[g].in_service) {
        body.add(tag + ".u_G." + std::to_string(net.generators()[g].bus), last.u_generator[g]);
      }
    }
    for (std::size_t i = 0; i < net.lccs().size(); ++i) {
      if (net.lccs()[i].in_service) body.add(tag + ".u_D." + net.lccs()[i].name, last.u_lcc[i]);
    }
    body.add(tag + ".cost", run->cost);
  }
  body.add("coefficients_equal", rep.coefficients_equal ? "yes" : "no");
  body.add("cost_ordering", rep.ordering_holds ? "optimal <= average" : "violated");
  if (o.out) {
    auto path = prepare_out(o) / (case_name(c) + "_compare.json");
    body.add("report_file", path.string());
    write_json(path, body);
  }
  write_report(out, "compare", body, o.format);
  if (!rep.ordering_holds) {
    err << error_record("ComparisonFailed", "optimal droop cost exceeds average droop cost", 1) << '\n';
    return 1;
  }
  return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coordinated-droop emergency frequency control for hybrid AC-DC grids", "midc"};
  app.require_subcommand(1);
  CommandOptions o;
  std::string out_dir;
  std::string format = "text";
  std::string droop;

  auto common = [&](CLI::App* s) {
    s->add_option("--scenario", o.scenario, "case file")->required();
    s->add_option("--out", out_dir, "output directory");
    s->add_option("--objective", o.objective, "cost objective (1 or 2)")->check(CLI::IsMember({1, 2}));
    s->add_option("--dead-zone-hz", o.dead_zone_hz, "LCC dead zone in Hz")->check(CLI::NonNegativeNumber);
    s->add_option("--droop", droop, "optimal | average | manual")->check(CLI::IsMember({"optimal", "average", "manual"}));
    s->add_option("--format", format, "text | rows")->check(CLI::IsMember({"text", "rows"}));
  };
  CLI::App* sim = app.add_subcommand("simulate", "integrate a scenario and report the response");
  CLI::App* des = app.add_subcommand("design", "print the droop coefficient table");
  CLI::App* ver = app.add_subcommand("verify", "optimality, primal-dual and Lyapunov checks");
  CLI::App* cmp = app.add_subcommand("compare", "optimal versus average droop cost");
  for (CLI::App* s : {sim, des, ver, cmp}) common(s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << error_record("UsageError", e.what(), 2) << '\n';
    return 2;
  }
  if (!out_dir.empty()) o.out = out_dir;
  if (!droop.empty()) o.droop = droop;
  o.format = format == "rows" ? ReportFormat::Rows : ReportFormat::Text;

  try {
    if (sim->parsed()) return cmd_simulate(o, out, err);
    if (des->parsed()) return cmd_design(o, out, err);
    if (ver->parsed()) return cmd_verify(o, out, err);
    return cmd_compare(o, out, err);
  } catch (const Error& e) {
    int code = exit_code_for(e.kind());
    err << error_record(to_string(e.kind()), e.what(), code) << '\n';
    return code;
  } catch (const std::exception& e) {
    err << error_record("InternalError", e.what(), 4) << '\n';
    return 4;
  }
}

}  // namespace midc
