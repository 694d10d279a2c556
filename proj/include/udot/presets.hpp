#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "udot/density.hpp"
#include "udot/region.hpp"
#include "udot/surplus.hpp"

namespace udot {

/// Closed-form solution of a preset, when known. Used for reporting errors.
struct ExactSolution {
  std::function<double(double)> k;     // v'
  std::function<double(double)> v;     // up to an additive constant
  std::function<double(Vec2)> u;
  std::function<double(Vec2)> map;     // F
};

/// A complete transport problem description selectable by name.
struct Preset {
  std::string name;
  SurplusPtr model;
  Region region;
  SourceDensity f;
  TargetDensity g;
  std::optional<ExactSolution> exact;
};

using PresetFactory = std::function<Preset()>;

/// Registers a preset under a name; replaces an existing entry.
/// Custom surpluses enter the program through this compiled registry.
void register_preset(const std::string& name, PresetFactory factory);

/// Builds the preset registered under `name`; throws Config if unknown.
Preset make_preset(const std::string& name);

std::vector<std::string> preset_names();

/// X = {1/2 <= |x| <= 1}, s = x . y on the unit circle, f and g uniform.
Preset annulus_preset();
/// X = unit square, s = x1 y, Y = [0,1], f and g uniform.
Preset strip_preset();
/// X = unit square, s = x1 y + x2 y^2 / 2, Y = [0,1], f and g uniform.
Preset tilted_preset();

}  // namespace udot
