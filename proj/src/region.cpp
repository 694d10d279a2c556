#include "udot/region.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "udot/error.hpp"

namespace udot {

Region::Region(std::string label, ScalarFn implicit, VectorFn gradient, BBox bbox)
    : label_(std::move(label)),
      implicit_(std::move(implicit)),
      gradient_(std::move(gradient)),
      bbox_(bbox) {
  if (!(bbox_.width() > 0.0 && bbox_.height() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "region '" + label_ + "' has an empty bounding box");
  }
  pieces_.push_back(implicit_);
}

Region::Region(std::string label, ScalarFn implicit, VectorFn gradient, BBox bbox,
               std::vector<ScalarFn> pieces)
    : Region(std::move(label), std::move(implicit), std::move(gradient), bbox) {
  if (pieces.empty() || pieces.size() > 6) {
    throw Error(ErrorCode::InvalidArgument, "region '" + label_ + "' needs 1 to 6 pieces");
  }
  pieces_ = std::move(pieces);
}

Region Region::annulus(double r_in, double r_out) {
  if (!(r_in >= 0.0 && r_out > r_in)) {
    throw Error(ErrorCode::InvalidArgument, "annulus radii must satisfy 0 <= r_in < r_out");
  }
  const double mid = 0.5 * (r_in + r_out);
  auto implicit = [=](Vec2 x) {
    const double r = norm(x);
    return std::max(r - r_out, r_in - r);
  };
  auto gradient = [=](Vec2 x) {
    const double r = norm(x);
    if (r == 0.0) return Vec2{};
    const Vec2 radial = (1.0 / r) * x;
    return r >= mid ? radial : -radial;
  };
  std::vector<ScalarFn> pieces{[=](Vec2 x) { return norm(x) - r_out; },
                               [=](Vec2 x) { return r_in - norm(x); }};
  return Region("annulus", implicit, gradient, BBox{{-r_out, -r_out}, {r_out, r_out}},
                std::move(pieces));
}

Region Region::rectangle(BBox box) {
  const Vec2 c = 0.5 * (box.lo + box.hi);
  const Vec2 half = 0.5 * (box.hi - box.lo);
  auto implicit = [=](Vec2 x) {
    return std::max(std::abs(x.x1 - c.x1) - half.x1, std::abs(x.x2 - c.x2) - half.x2);
  };
  auto gradient = [=](Vec2 x) {
    const double d1 = std::abs(x.x1 - c.x1) - half.x1;
    const double d2 = std::abs(x.x2 - c.x2) - half.x2;
    if (d1 >= d2) return Vec2{x.x1 >= c.x1 ? 1.0 : -1.0, 0.0};
    return Vec2{0.0, x.x2 >= c.x2 ? 1.0 : -1.0};
  };
  std::vector<ScalarFn> pieces{[=](Vec2 x) { return box.lo.x1 - x.x1; },
                               [=](Vec2 x) { return x.x1 - box.hi.x1; },
                               [=](Vec2 x) { return box.lo.x2 - x.x2; },
                               [=](Vec2 x) { return x.x2 - box.hi.x2; }};
  return Region("rectangle", implicit, gradient, box, std::move(pieces));
}

}  // namespace udot
