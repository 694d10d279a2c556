#include "udot/presets.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "udot/error.hpp"

namespace udot {

namespace {

struct Registry {
  std::mutex mutex;
  std::map<std::string, PresetFactory> factories;

  Registry() {
    factories["annulus"] = annulus_preset;
    factories["strip"] = strip_preset;
    factories["tilted"] = tilted_preset;
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

void register_preset(const std::string& name, PresetFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.factories[name] = std::move(factory);
}

Preset make_preset(const std::string& name) {
  auto& r = registry();
  PresetFactory factory;
  {
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) throw Error(ErrorCode::Config, "unknown preset '" + name + "'");
    factory = it->second;
  }
  return factory();
}

std::vector<std::string> preset_names() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.factories) names.push_back(name);
  return names;
}

Preset annulus_preset() {
  const double f0 = 4.0 / (3.0 * std::numbers::pi);  // 1 / area of the annulus
  ExactSolution exact;
  exact.k = [](double) { return 0.0; };
  exact.v = [](double) { return 0.0; };
  exact.u = [](Vec2 x) { return norm(x); };
  exact.map = [](Vec2 x) {
    const double a = std::atan2(x.x2, x.x1);
    return a < 0.0 ? a + kTwoPi : a;
  };
  return Preset{"annulus", make_bilinear_circle_surplus(), Region::annulus(0.5, 1.0),
                SourceDensity::constant(f0), TargetDensity::constant(1.0 / kTwoPi), exact};
}

Preset strip_preset() {
  ExactSolution exact;
  exact.k = [](double y) { return y; };
  exact.v = [](double y) { return 0.5 * y * y; };
  exact.u = [](Vec2 x) { return 0.5 * x.x1 * x.x1; };
  exact.map = [](Vec2 x) { return x.x1; };
  return Preset{"strip", make_strip_surplus(), Region::rectangle({{0.0, 0.0}, {1.0, 1.0}}),
                SourceDensity::constant(1.0), TargetDensity::constant(1.0), exact};
}

Preset tilted_preset() {
  return Preset{"tilted", make_tilted_surplus(), Region::rectangle({{0.0, 0.0}, {1.0, 1.0}}),
                SourceDensity::constant(1.0), TargetDensity::constant(1.0), std::nullopt};
}

}  // namespace udot
