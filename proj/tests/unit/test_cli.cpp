#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "midc/commands.hpp"
#include "midc/verify.hpp"
#include "support.hpp"

using namespace midc;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "midc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("midc_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

/// Copy of the 3-bus fixture with one substring replaced.
fs::path edited_three_bus(const std::string& name, const std::string& from, const std::string& to) {
  std::string text = slurp(test::fixture("three_bus_minimal.cfg"));
  auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  fs::path p = scratch_dir(name) / "case.cfg";
  std::ofstream(p) << text;
  return p;
}

std::string value_of(const std::string& report, const std::string& key) {
  std::istringstream in(report);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ": ", 0) == 0) return line.substr(key.size() + 2);
  }
  return {};
}

}  // namespace

TEST_SUITE("verify") {
  TEST_CASE("three-bus fixture passes every check") {
    VerifyReport r = verify_case(load_case_file(test::fixture("three_bus_minimal.cfg")));
    REQUIRE(r.checks.size() == 4);
    for (const CheckResult& c : r.checks) CHECK_MESSAGE(c.status == CheckStatus::Pass, c.name << ": " << c.detail);
    CHECK(r.ok());
  }

  TEST_CASE("forced saturation skips the optimality check") {
    Case c = load_case(slurp(edited_three_bus("sat", "delta=-1", "delta=-3")), test::fixture(""));
    DroopCoefficients k = design_coefficients(c.network, c.scenario.control);
    Trajectory t = simulate(c.network, c.scenario, k);
    REQUIRE_FALSE(t.failed);
    REQUIRE(t.samples.back().saturated[0]);
    CheckResult r = check_optimality(c.scenario, t, k, 1e-4);
    CHECK(r.status == CheckStatus::Skipped);
    CHECK(r.detail.rfind("skipped: boundary regime", 0) == 0);
    CHECK(check_steady_state(t, k, 1e-6).status == CheckStatus::Pass);
  }

  TEST_CASE("implied cost model reproduces the gains") {
    Network n = test::three_bus();
    DroopCoefficients k{{7.0}, {3.0}};
    OptimalDroop d = optimal_droop(implied_oefc_problem(n, k));
    CHECK(d.generator[0] == doctest::Approx(7.0));
    CHECK(d.lcc[0] == doctest::Approx(3.0));
  }

  TEST_CASE("equal coefficients give equal costs") {
    // one generator and one link: the class averages are the gains themselves
    CompareReport r = compare_droop(load_case_file(test::fixture("three_bus_minimal.cfg")), Objective::I);
    CHECK(r.coefficients_equal);
    CHECK(r.optimal.cost == doctest::Approx(r.average.cost).epsilon(1e-12));
    CHECK(r.ordering_holds);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("rounding for display") {
    CHECK(round_half_up(11.025, 2) == doctest::Approx(11.03));
    CHECK(round_half_up(10.625, 2) == doctest::Approx(10.63));
    CHECK(round_half_up(10.416666666, 2) == doctest::Approx(10.42));
    CHECK(round_half_up(-2.345, 2) == doctest::Approx(-2.35));
    CHECK(format_number(-0.0) == "0");
  }

  TEST_CASE("simulate happy path writes trajectory and report") {
    fs::path out = scratch_dir("sim");
    CliRun r = run({"simulate", "--scenario", test::fixture("three_bus_minimal.cfg").string(), "--out", out.string()});
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    CHECK(r.out.rfind("# midc simulate ", 0) == 0);
    CHECK(value_of(r.out, "status") == "ok");
    CHECK(std::stod(value_of(r.out, "terminal_deviation_pu")) == doctest::Approx(-0.08).epsilon(1e-8));
    CHECK(value_of(r.out, "check.steady_state") == "pass");
    REQUIRE(fs::exists(out / "three_bus_minimal_trajectory.csv"));
    REQUIRE(fs::exists(out / "three_bus_minimal_report.json"));
    auto j = nlohmann::json::parse(slurp(out / "three_bus_minimal_report.json"));
    CHECK(j["scenario"] == "three_bus_minimal");
    CHECK(j["terminal_deviation_pu"].get<double>() == doctest::Approx(-0.08).epsilon(1e-8));
    std::string csv = slurp(out / "three_bus_minimal_trajectory.csv");
    CHECK(csv.rfind("time_s,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 1501);
  }

  TEST_CASE("missing scenario") {
    CliRun r = run({"simulate", "--scenario", "/nonexistent/case.cfg"});
    CHECK(r.code == 2);
    auto j = nlohmann::json::parse(r.err);
    CHECK(j["error"] == "FileNotFound");
    CHECK(j["exit_code"] == 2);
    CHECK(j["message"].get<std::string>().find("scenario not found") != std::string::npos);
  }

  TEST_CASE("solver failure mid-run flags a partial trajectory") {
    fs::path cfg = edited_three_bus("diverge", "delta=-1", "delta=-25");
    fs::path out = cfg.parent_path() / "out";
    CliRun r = run({"simulate", "--scenario", cfg.string(), "--out", out.string()});
    CHECK(r.code == 3);
    CHECK(value_of(r.out, "status") == "failed");
    CHECK(fs::exists(out / "three_bus_minimal_trajectory.csv"));
    CHECK(nlohmann::json::parse(r.err)["exit_code"] == 3);
  }

  TEST_CASE("design table, both objectives") {
    std::string ne = test::fixture("g6_trip.cfg").string();
    CliRun one = run({"design", "--scenario", ne});
    CHECK(one.code == 0);
    CHECK(value_of(one.out, "kD.LCC1.table") == "11.03");
    CHECK(value_of(one.out, "kD.LCC2.table") == "14.40");
    CHECK(value_of(one.out, "kD.LCC3.table") == "8.10");
    CHECK(value_of(one.out, "kD.LCC4.table") == "10.00");
    CHECK(value_of(one.out, "kG.30.table") == "10.00");
    CHECK(value_of(one.out, "kG.31.table") == "5.00");
    CliRun two = run({"design", "--scenario", ne, "--objective", "2", "--format", "rows"});
    CHECK(two.code == 0);
    CHECK(two.out.find("\nkey,value\n") != std::string::npos);
    CHECK(two.out.find("\nkD.LCC1.table,10.42\n") != std::string::npos);
    CHECK(two.out.find("\nkD.LCC2.table,15.00\n") != std::string::npos);
    CHECK(two.out.find("\nkD.LCC3.table,6.67\n") != std::string::npos);
    CHECK(two.out.find("\nkD.LCC4.table,10.42\n") != std::string::npos);
  }

  TEST_CASE("objective II without K^f") {
    fs::path cfg = edited_three_bus("nokf", " kf=20", "");
    CliRun r = run({"design", "--scenario", cfg.string(), "--objective", "2"});
    CHECK(r.code == 4);
    CHECK(nlohmann::json::parse(r.err)["error"] == "MissingParameter");
  }

  TEST_CASE("verify exit status follows the checks") {
    CliRun ok = run({"verify", "--scenario", test::fixture("three_bus_minimal.cfg").string()});
    CHECK(ok.code == 0);
    CHECK(value_of(ok.out, "result") == "pass");
    for (const char* c : {"steady_state", "optimality", "pd_equivalence", "lyapunov"}) {
      CHECK(value_of(ok.out, std::string("check.") + c) == "pass");
    }
    // d far from 1/k^D: whatever the certificate says, exit status must agree
    fs::path cfg = edited_three_bus("dscale", "horizon_s = 15", "horizon_s = 15\nlyapunov_d_scale = 100");
    CliRun odd = run({"verify", "--scenario", cfg.string()});
    CHECK((odd.code == 0) == (value_of(odd.out, "result") == "pass"));
    if (odd.code != 0) CHECK(nlohmann::json::parse(odd.err)["exit_code"] == 1);
  }

  TEST_CASE("usage errors") {
    CHECK(run({}).code == 2);
    CHECK(run({"simulate"}).code == 2);
    CHECK(run({"design", "--scenario", "x", "--format", "xml"}).code == 2);
    CliRun bad = run({"frobnicate"});
    CHECK(bad.code == 2);
    CHECK(nlohmann::json::parse(bad.err)["error"] == "UsageError");
    CliRun help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("simulate") != std::string::npos);
  }

  TEST_CASE("command-line overrides") {
    fs::path f = test::fixture("three_bus_minimal.cfg");
    CommandOptions o;
    o.scenario = f;
    o.objective = 2;
    o.dead_zone_hz = 0.2;
    o.droop = "average";
    Case c = load_with_overrides(o);
    CHECK(c.scenario.control.objective == Objective::II);
    CHECK(c.scenario.control.dead_zone == doctest::Approx(0.004));
    CHECK(c.scenario.control.droop == DroopSource::Average);
    CHECK(run({"design", "--scenario", f.string(), "--droop", "bogus"}).code == 2);
    CHECK(run({"design", "--scenario", f.string(), "--objective", "3"}).code == 2);
    CHECK(run({"design", "--scenario", f.string(), "--dead-zone-hz", "-1"}).code == 2);
  }
}
