#include "midc/error.hpp"

namespace midc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorKind::RolePartitionViolation: return "RolePartitionViolation";
    case ErrorKind::DuplicateLccAttachment: return "DuplicateLccAttachment";
    case ErrorKind::MissingParameters: return "MissingParameters";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnknownBusReference: return "UnknownBusReference";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::ZeroDcVoltage: return "ZeroDcVoltage";
    case ErrorKind::NewtonDivergence: return "NewtonDivergence";
    case ErrorKind::InfeasibleFlow: return "InfeasibleFlow";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::NoSecureSolution: return "NoSecureSolution";
    case ErrorKind::UnsupportedRegime: return "UnsupportedRegime";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ZeroTotalDroop: return "ZeroTotalDroop";
    case ErrorKind::MissingParameter: return "MissingParameter";
  }
  return "Unknown";
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace midc
