#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace udot {

enum class ErrorCode {
  ZeroMargin,
  NoPreimage,
  NotConvex,
  DegenerateCell,
  TransversalityLoss,
  EmptyLevelSet,
  NonPositiveMass,
  NotElliptic,
  BracketFailure,
  ShootingDivergence,
  EllipticityLoss,
  RejectionStall,
  EmptyDiscretization,
  Unbalanced,
  InstanceTooLarge,
  InvalidArgument,
  Config,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure the library reports. The message
/// carries the location (x or (y,p,q)) that triggered it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace udot
