#pragma once

#include <functional>

#include "udot/types.hpp"

namespace udot {

/// Source density f on the plane, with sampled bounds L_f <= f <= U_f.
/// The gradient is optional; without it a one-sided difference is used.
struct SourceDensity {
  std::function<double(Vec2)> value;
  std::function<Vec2(Vec2)> gradient;
  double lower = 0.0;
  double upper = 0.0;

  double operator()(Vec2 x) const { return value(x); }
  Vec2 grad(Vec2 x) const;

  static SourceDensity constant(double c);
};

/// Target density g on the one-dimensional target set.
struct TargetDensity {
  std::function<double(double)> value;
  double lower = 0.0;
  double upper = 0.0;

  double operator()(double y) const { return value(y); }

  static TargetDensity constant(double c);
};

}  // namespace udot
