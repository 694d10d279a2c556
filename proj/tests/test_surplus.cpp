#include <gtest/gtest.h>

#include <cmath>

#include "udot/presets.hpp"
#include "udot/sampling.hpp"
#include "udot/surplus.hpp"

using namespace udot;

namespace {

const Region kSquare = Region::rectangle({{0, 0}, {1, 1}});

SurplusPtr linear_x1() { return make_strip_surplus(); }

}  // namespace

TEST(Surplus, CircleBundleAtOrigin) {
  auto s = make_bilinear_circle_surplus();
  const auto b = eval_bundle(*s, {1, 0}, 0.0);
  EXPECT_NEAR(b.s, 1.0, 1e-15);
  EXPECT_NEAR(b.s_y, 0.0, 1e-15);
  EXPECT_NEAR(b.s_yy, -1.0, 1e-15);
  EXPECT_NEAR(b.grad_x_y.x1, 0.0, 1e-15);
  EXPECT_NEAR(b.grad_x_y.x2, 1.0, 1e-15);
  EXPECT_TRUE(s->target().periodic);
}

TEST(Surplus, LinearBundle) {
  const auto b = eval_bundle(*linear_x1(), {0.3, 0.7}, 0.5);
  EXPECT_NEAR(b.s, 0.15, 1e-15);
  EXPECT_NEAR(b.s_y, 0.3, 1e-15);
  EXPECT_NEAR(b.s_yy, 0.0, 1e-15);
  EXPECT_NEAR(b.grad_x_y.x1, 1.0, 1e-15);
  EXPECT_NEAR(b.grad_x_y.x2, 0.0, 1e-15);
}

TEST(Surplus, PresetBundlesMatchFiniteDifferences) {
  for (const auto& name : {"annulus", "strip", "tilted"}) {
    const Preset p = make_preset(name);
    EXPECT_LE(max_finite_difference_error(*p.model, p.region, 1000, 11), 1e-5) << name;
  }
  const auto c = convexify(make_tilted_surplus(), 0.7);
  EXPECT_LE(max_finite_difference_error(*c, kSquare, 1000, 12), 1e-5);
}

TEST(Surplus, NondegeneracyMargins) {
  EXPECT_NEAR(check_nondegeneracy(*linear_x1(), kSquare).min_value, 1.0, 1e-12);
  const Preset an = annulus_preset();
  EXPECT_NEAR(check_nondegeneracy(*an.model, an.region).min_value, 1.0, 1e-12);
  auto zero = make_surplus("zero", TargetDomain{0, 1, false},
                           [](Vec2, double) { return DerivativeBundle{}; });
  try {
    check_nondegeneracy(*zero, kSquare);
    FAIL() << "expected ZeroMargin";
  } catch (const ZeroMarginError& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroMargin);
    EXPECT_LT(e.report().min_value, 1e-8);
  }
}

TEST(Surplus, NondegeneracyIsDeterministic) {
  const Preset t = tilted_preset();
  MarginOptions o;
  o.seed = 5;
  const auto a = check_nondegeneracy(*t.model, t.region, o);
  const auto b = check_nondegeneracy(*t.model, t.region, o);
  EXPECT_EQ(a.min_value, b.min_value);
  EXPECT_EQ(a.argmin_x, b.argmin_x);
}

TEST(Surplus, EnhancedTwist) {
  const Preset an = annulus_preset();
  EXPECT_GT(check_enhanced_twist(*an.model, an.region).min_value, 0.0);
  const Preset t = tilted_preset();
  EXPECT_GT(check_enhanced_twist(*t.model, t.region).min_value, 0.0);
  EXPECT_THROW(check_enhanced_twist(*linear_x1(), kSquare), ZeroMarginError);
}

TEST(Surplus, SExp) {
  auto c = make_bilinear_circle_surplus();
  EXPECT_NEAR(s_exp(*c, {0.75, 0}, {1, 0}), 0.0, 1e-8);
  EXPECT_NEAR(s_exp(*linear_x1(), {0.2, 0.9}, {0.4, 0}), 0.4, 1e-8);
  try {
    s_exp(*linear_x1(), {0.2, 0.9}, {0.4, 0.3});
    FAIL() << "expected NoPreimage";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoPreimage);
  }
}

TEST(Surplus, SExpInvertsGradient) {
  for (const auto& name : {"annulus", "tilted"}) {
    const Preset p = make_preset(name);
    HaltonSampler hs(3, 21);
    const BBox box = p.region.bbox();
    const TargetDomain t = p.model->target();
    int tested = 0;
    while (tested < 200) {
      const auto u = hs.next();
      const Vec2 x{box.lo.x1 + u[0] * box.width(), box.lo.x2 + u[1] * box.height()};
      if (!p.region.contains(x) || norm(x) < 1e-3) continue;
      const double y = t.lo + u[2] * t.length();
      const double back = s_exp(*p.model, x, p.model->grad_x(x, y));
      EXPECT_LE(t.distance(back, y), 1e-7) << name << " x=(" << x.x1 << "," << x.x2 << ") y=" << y;
      ++tested;
    }
  }
}

TEST(Surplus, LegendreDual) {
  auto half_square = make_surplus("y^2/2", TargetDomain{0, 1, false}, [](Vec2, double y) {
    DerivativeBundle b;
    b.s = 0.5 * y * y;
    b.s_y = y;
    b.s_yy = 1.0;
    return b;
  });
  const auto r = legendre_dual(*half_square, {0.5, 0.5}, 0.7);
  EXPECT_NEAR(r.value, 0.245, 1e-8);
  EXPECT_NEAR(r.maximizer, 0.7, 1e-8);
  EXPECT_TRUE(r.interior);

  try {
    legendre_dual(*linear_x1(), {0.3, 0.5}, 0.8);
    FAIL() << "expected NotConvex";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotConvex);
  }

  const auto c = convexify(linear_x1(), 1.0);
  const auto r2 = legendre_dual(*c, {0.3, 0.5}, 0.8);
  EXPECT_NEAR(r2.maximizer, 0.5, 1e-8);
  EXPECT_NEAR(r2.value, 0.125, 1e-8);
}

TEST(Surplus, FenchelInequality) {
  const auto c = convexify(make_tilted_surplus(), 1.0);
  HaltonSampler hs(4, 3);
  for (int n = 0; n < 200; ++n) {
    const auto u = hs.next();
    const Vec2 x{u[0], u[1]};
    const double y = u[2];
    const double p = -0.5 + 3.0 * u[3];
    const auto r = legendre_dual(*c, x, p);
    EXPECT_LE(y * p, c->value(x, y) + r.value + 1e-10);
    EXPECT_NEAR(r.maximizer * p, c->value(x, r.maximizer) + r.value, 1e-9);
  }
}

TEST(Surplus, LegendreNondegeneracyBound) {
  // |D_x p of s*(x, s_y(x,y))| >= |D_x s_y| / s_yy for the convexified surplus.
  const auto c = convexify(make_tilted_surplus(), 1.0);
  HaltonSampler hs(3, 9);
  const double h = 1e-5;
  for (int n = 0; n < 100; ++n) {
    const auto u = hs.next();
    const Vec2 x{0.05 + 0.9 * u[0], 0.05 + 0.9 * u[1]};
    const double y = 0.1 + 0.8 * u[2];
    const auto b = c->bundle(x, y);
    const double p = b.s_y;
    auto ystar = [&](Vec2 z) { return legendre_dual(*c, z, p).maximizer; };
    // D_p s* = y*, so D_x D_p s* is the x-gradient of the maximizer.
    const Vec2 g{(ystar({x.x1 + h, x.x2}) - ystar({x.x1 - h, x.x2})) / (2 * h),
                 (ystar({x.x1, x.x2 + h}) - ystar({x.x1, x.x2 - h})) / (2 * h)};
    EXPECT_GE(norm(g), norm(b.grad_x_y) / b.s_yy * (1 - 1e-3));
  }
}

TEST(Surplus, ConvexifyRejectsPeriodic) {
  try {
    convexify(make_bilinear_circle_surplus(), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(Surplus, ConvexifyAddsQuadratic) {
  const auto base = make_tilted_surplus();
  const auto c = convexify(base, 0.5);
  const auto b0 = base->bundle({0.2, 0.4}, 0.3);
  const auto b1 = c->bundle({0.2, 0.4}, 0.3);
  EXPECT_NEAR(b1.s - b0.s, 0.5 * 0.5 * 0.09, 1e-15);
  EXPECT_NEAR(b1.s_y - b0.s_y, 0.15, 1e-15);
  EXPECT_NEAR(b1.s_yy - b0.s_yy, 0.5, 1e-15);
  EXPECT_EQ(b1.grad_x_y, b0.grad_x_y);
}

TEST(Presets, RegistryKnowsNames) {
  const auto names = preset_names();
  for (const auto& n : {"annulus", "strip", "tilted"})
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end());
  try {
    make_preset("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Config);
  }
}
