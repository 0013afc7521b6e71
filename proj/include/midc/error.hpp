#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace midc {

enum class ErrorKind {
  DisconnectedGraph,
  RolePartitionViolation,
  DuplicateLccAttachment,
  MissingParameters,
  InvalidParameter,
  ParseError,
  UnknownBusReference,
  FileNotFound,
  ZeroDcVoltage,
  NewtonDivergence,
  InfeasibleFlow,
  SingularJacobian,
  NoSecureSolution,
  UnsupportedRegime,
  Infeasible,
  NoConvergence,
  ZeroTotalDroop,
  MissingParameter,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace midc
