#pragma once

#include <functional>
#include <string>
#include <vector>

#include "udot/types.hpp"

namespace udot {

/// Implicitly described source domain X = {implicit <= 0} inside a bounding
/// box. The gradient of the implicit function gives the outward normal.
class Region {
 public:
  using ScalarFn = std::function<double(Vec2)>;
  using VectorFn = std::function<Vec2(Vec2)>;

  Region(std::string label, ScalarFn implicit, VectorFn gradient, BBox bbox);
  /// `pieces` are smooth functions whose joint sublevel set is X; area
  /// integrals clip against each of them instead of the (kinked) implicit.
  Region(std::string label, ScalarFn implicit, VectorFn gradient, BBox bbox,
         std::vector<ScalarFn> pieces);

  /// Annulus {r_in <= |x| <= r_out}.
  static Region annulus(double r_in, double r_out);
  /// Closed axis-aligned rectangle.
  static Region rectangle(BBox box);

  double implicit(Vec2 x) const { return implicit_(x); }
  Vec2 gradient(Vec2 x) const { return gradient_(x); }
  /// Outward unit normal; zero where the gradient vanishes.
  Vec2 boundary_normal(Vec2 x) const { return normalized(gradient_(x)); }
  bool contains(Vec2 x, double tol = 0.0) const { return implicit_(x) <= tol; }

  const BBox& bbox() const { return bbox_; }
  const std::vector<ScalarFn>& pieces() const { return pieces_; }
  const std::string& label() const { return label_; }

 private:
  std::string label_;
  ScalarFn implicit_;
  VectorFn gradient_;
  BBox bbox_;
  std::vector<ScalarFn> pieces_;
};

}  // namespace udot
