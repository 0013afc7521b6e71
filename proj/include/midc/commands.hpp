#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "midc/error.hpp"
#include "midc/scenario.hpp"

namespace midc {

enum class ReportFormat { Text, Rows };

struct CommandOptions {
  std::filesystem::path scenario;
  std::optional<std::filesystem::path> out;
  std::optional<int> objective;
  std::optional<double> dead_zone_hz;
  std::optional<std::string> droop;
  ReportFormat format = ReportFormat::Text;
};

/// Ordered key/value body of a command report.
struct ReportBody {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(std::string key, std::string value);
  void add(std::string key, double value);  // 9 significant digits
};

/// Rounds half away from zero at `decimals` places, tolerant of the binary
/// representation of decimal ties such as 11.025.
double round_half_up(double value, int decimals);

std::string format_number(double value);

/// Writes the report: one timestamp header line, then the deterministic body.
void write_report(std::ostream& out, const std::string& command, const ReportBody& body, ReportFormat format);

/// One-line JSON error record.
std::string error_record(std::string_view kind, std::string_view message, int exit_code);

/// Exit codes: 0 success, 1 verification or comparison failure, 2 missing
/// file or bad usage, 3 solver failure during a run, 4 any other error.
int exit_code_for(ErrorKind kind);

/// Loads the case and applies the command-line overrides.
Case load_with_overrides(const CommandOptions& options);

int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_design(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_verify(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_compare(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace midc
