#include "udot/error.hpp"

namespace udot {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroMargin: return "ZeroMargin";
    case ErrorCode::NoPreimage: return "NoPreimage";
    case ErrorCode::NotConvex: return "NotConvex";
    case ErrorCode::DegenerateCell: return "DegenerateCell";
    case ErrorCode::TransversalityLoss: return "TransversalityLoss";
    case ErrorCode::EmptyLevelSet: return "EmptyLevelSet";
    case ErrorCode::NonPositiveMass: return "NonPositiveMass";
    case ErrorCode::NotElliptic: return "NotElliptic";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::ShootingDivergence: return "ShootingDivergence";
    case ErrorCode::EllipticityLoss: return "EllipticityLoss";
    case ErrorCode::RejectionStall: return "RejectionStall";
    case ErrorCode::EmptyDiscretization: return "EmptyDiscretization";
    case ErrorCode::Unbalanced: return "Unbalanced";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace udot
