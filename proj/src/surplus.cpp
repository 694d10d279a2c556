#include "udot/surplus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "udot/density.hpp"
#include "udot/sampling.hpp"

namespace udot {

SurplusModel::SurplusModel(std::string label, TargetDomain target)
    : label_(std::move(label)), target_(target) {}

namespace {

class BilinearCircle final : public SurplusModel {
 public:
  BilinearCircle() : SurplusModel("bilinear-circle", TargetDomain{0.0, kTwoPi, true}) {}

  DerivativeBundle bundle(Vec2 x, double y) const override {
    const double c = std::cos(y), s = std::sin(y);
    DerivativeBundle b;
    b.s = x.x1 * c + x.x2 * s;
    b.s_y = -x.x1 * s + x.x2 * c;
    b.s_yy = -b.s;
    b.s_yyy = -b.s_y;
    b.grad_x = {c, s};
    b.grad_x_y = {-s, c};
    b.grad_x_yy = {-c, -s};
    return b;
  }
  double value(Vec2 x, double y) const override { return x.x1 * std::cos(y) + x.x2 * std::sin(y); }
  double d_y(Vec2 x, double y) const override { return -x.x1 * std::sin(y) + x.x2 * std::cos(y); }
  double d_yy(Vec2 x, double y) const override { return -value(x, y); }
};

class Strip final : public SurplusModel {
 public:
  Strip() : SurplusModel("strip", TargetDomain{0.0, 1.0, false}) {}

  DerivativeBundle bundle(Vec2 x, double y) const override {
    DerivativeBundle b;
    b.s = x.x1 * y;
    b.s_y = x.x1;
    b.grad_x = {y, 0.0};
    b.grad_x_y = {1.0, 0.0};
    return b;
  }
  double value(Vec2 x, double y) const override { return x.x1 * y; }
  double d_y(Vec2 x, double) const override { return x.x1; }
  double d_yy(Vec2, double) const override { return 0.0; }
};

class Tilted final : public SurplusModel {
 public:
  Tilted() : SurplusModel("tilted", TargetDomain{0.0, 1.0, false}) {}

  DerivativeBundle bundle(Vec2 x, double y) const override {
    DerivativeBundle b;
    b.s = x.x1 * y + 0.5 * x.x2 * y * y;
    b.s_y = x.x1 + x.x2 * y;
    b.s_yy = x.x2;
    b.grad_x = {y, 0.5 * y * y};
    b.grad_x_y = {1.0, y};
    b.grad_x_yy = {0.0, 1.0};
    return b;
  }
  double value(Vec2 x, double y) const override { return x.x1 * y + 0.5 * x.x2 * y * y; }
  double d_y(Vec2 x, double y) const override { return x.x1 + x.x2 * y; }
  double d_yy(Vec2 x, double) const override { return x.x2; }
};

class Custom final : public SurplusModel {
 public:
  Custom(std::string label, TargetDomain target, std::function<DerivativeBundle(Vec2, double)> fn)
      : SurplusModel(std::move(label), target), fn_(std::move(fn)) {}

  DerivativeBundle bundle(Vec2 x, double y) const override { return fn_(x, y); }

 private:
  std::function<DerivativeBundle(Vec2, double)> fn_;
};

class Convexified final : public SurplusModel {
 public:
  Convexified(SurplusPtr base, double c)
      : SurplusModel(base->label() + "+convex", base->target()), base_(std::move(base)), c_(c) {}

  DerivativeBundle bundle(Vec2 x, double y) const override {
    DerivativeBundle b = base_->bundle(x, y);
    b.s += 0.5 * c_ * y * y;
    b.s_y += c_ * y;
    b.s_yy += c_;
    return b;
  }
  double value(Vec2 x, double y) const override { return base_->value(x, y) + 0.5 * c_ * y * y; }
  double d_y(Vec2 x, double y) const override { return base_->d_y(x, y) + c_ * y; }
  double d_yy(Vec2 x, double y) const override { return base_->d_yy(x, y) + c_; }

 private:
  SurplusPtr base_;
  double c_;
};

struct Sample {
  Vec2 x;
  double y;
  double y_bar;
};

// Quasi-random points of X x Y x Y; rejection against the region.
std::vector<Sample> sample_product(const SurplusModel& model, const Region& region, int n,
                                   std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  HaltonSampler halton(4, seed);
  const BBox& box = region.bbox();
  const TargetDomain& t = model.target();
  std::vector<Sample> out;
  out.reserve(n);
  const long max_attempts = 1000L * n;
  for (long attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < n; ++attempt) {
    const auto u = halton.next();
    Vec2 x{box.lo.x1 + u[0] * box.width(), box.lo.x2 + u[1] * box.height()};
    if (!region.contains(x)) continue;
    out.push_back({x, t.lo + u[2] * t.length(), t.lo + u[3] * t.length()});
  }
  if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no samples fall inside the region");
  return out;
}

double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
}

}  // namespace

SurplusPtr make_bilinear_circle_surplus() { return std::make_shared<BilinearCircle>(); }
SurplusPtr make_strip_surplus() { return std::make_shared<Strip>(); }
SurplusPtr make_tilted_surplus() { return std::make_shared<Tilted>(); }

SurplusPtr make_surplus(std::string label, TargetDomain target,
                        std::function<DerivativeBundle(Vec2, double)> fn) {
  return std::make_shared<Custom>(std::move(label), target, std::move(fn));
}

SurplusPtr convexify(SurplusPtr base, double coefficient) {
  if (coefficient == 0.0) return base;
  if (base->target().periodic) {
    throw Error(ErrorCode::InvalidArgument, "cannot convexify a surplus on a periodic target");
  }
  return std::make_shared<Convexified>(std::move(base), coefficient);
}

DerivativeBundle eval_bundle(const SurplusModel& model, Vec2 x, double y) {
  return model.bundle(x, y);
}

double max_finite_difference_error(const SurplusModel& model, const Region& region,
                                   int n_samples, std::uint64_t seed, double step) {
  double worst = 0.0;
  const Vec2 e1{step, 0.0}, e2{0.0, step};
  const double inv2h = 0.5 / step;
  for (const auto& smp : sample_product(model, region, n_samples, seed)) {
    const Vec2 x = smp.x;
    const double y = smp.y;
    const DerivativeBundle b = model.bundle(x, y);
    const DerivativeBundle yp = model.bundle(x, y + step), ym = model.bundle(x, y - step);
    const DerivativeBundle ap = model.bundle(x + e1, y), am = model.bundle(x - e1, y);
    const DerivativeBundle bp = model.bundle(x + e2, y), bm = model.bundle(x - e2, y);
    worst = std::max({worst,
                      rel_err(b.s_y, (yp.s - ym.s) * inv2h),
                      rel_err(b.s_yy, (yp.s_y - ym.s_y) * inv2h),
                      rel_err(b.s_yyy, (yp.s_yy - ym.s_yy) * inv2h),
                      rel_err(b.grad_x.x1, (ap.s - am.s) * inv2h),
                      rel_err(b.grad_x.x2, (bp.s - bm.s) * inv2h),
                      rel_err(b.grad_x_y.x1, (ap.s_y - am.s_y) * inv2h),
                      rel_err(b.grad_x_y.x2, (bp.s_y - bm.s_y) * inv2h),
                      rel_err(b.grad_x_yy.x1, (ap.s_yy - am.s_yy) * inv2h),
                      rel_err(b.grad_x_yy.x2, (bp.s_yy - bm.s_yy) * inv2h)});
  }
  return worst;
}

ZeroMarginError::ZeroMarginError(const std::string& what, MarginReport report)
    : Error(ErrorCode::ZeroMargin, what), report_(report) {}

namespace {

std::string describe(const MarginReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "min " << r.min_value << " at x=(" << r.argmin_x.x1 << "," << r.argmin_x.x2
     << ") y=" << r.argmin_y;
  if (r.argmin_y_bar) os << " ybar=" << *r.argmin_y_bar;
  return os.str();
}

}  // namespace

MarginReport check_nondegeneracy(const SurplusModel& model, const Region& region,
                                 const MarginOptions& opts) {
  MarginReport rep;
  rep.min_value = std::numeric_limits<double>::infinity();
  for (const auto& smp : sample_product(model, region, opts.n_samples, opts.seed)) {
    const double v = norm(model.grad_x_dy(smp.x, smp.y));
    ++rep.samples_used;
    if (v < rep.min_value) {
      rep.min_value = v;
      rep.argmin_x = smp.x;
      rep.argmin_y = smp.y;
    }
  }
  if (rep.min_value < opts.floor) {
    throw ZeroMarginError("non-degeneracy fails: " + describe(rep), rep);
  }
  return rep;
}

MarginReport check_enhanced_twist(const SurplusModel& model, const Region& region,
                                  const MarginOptions& opts) {
  MarginReport rep;
  rep.min_value = std::numeric_limits<double>::infinity();
  const TargetDomain& t = model.target();
  for (const auto& smp : sample_product(model, region, opts.n_samples, opts.seed)) {
    const double gap = t.distance(smp.y, smp.y_bar);
    if (gap < 1e-6 * t.length()) continue;
    const Vec2 d = model.grad_x(smp.x, smp.y) - model.grad_x(smp.x, smp.y_bar);
    const Vec2 n = normalized(model.grad_x_dy(smp.x, smp.y_bar));
    const Vec2 orth = d - dot(d, n) * n;
    const double v = norm(orth) / gap;
    ++rep.samples_used;
    if (v < rep.min_value) {
      rep.min_value = v;
      rep.argmin_x = smp.x;
      rep.argmin_y = smp.y;
      rep.argmin_y_bar = smp.y_bar;
    }
  }
  if (rep.samples_used == 0 || rep.min_value < opts.floor) {
    throw ZeroMarginError("enhanced twist fails: " + describe(rep), rep);
  }
  return rep;
}

double s_exp(const SurplusModel& model, Vec2 x, Vec2 p, double tol) {
  const TargetDomain& t = model.target();
  constexpr int kScan = 512;
  auto residual = [&](double y) { return norm(model.grad_x(x, y) - p); };

  double best_y = t.lo;
  double best_r = std::numeric_limits<double>::infinity();
  const int n = t.periodic ? kScan : kScan + 1;
  for (int i = 0; i < n; ++i) {
    const double y = t.lo + t.length() * i / kScan;
    const double r = residual(y);
    if (r < best_r) {
      best_r = r;
      best_y = y;
    }
  }
  // Gauss-Newton on |D_x s(x,y) - p|^2.
  double y = best_y;
  for (int it = 0; it < 60; ++it) {
    const Vec2 r = model.grad_x(x, y) - p;
    const Vec2 j = model.grad_x_dy(x, y);
    const double jj = dot(j, j);
    if (jj == 0.0) break;
    double step = dot(r, j) / jj;
    double y_new = y - step;
    if (!t.periodic) y_new = std::clamp(y_new, t.lo, t.hi);
    // Backtrack if the residual grows.
    for (int k = 0; k < 30 && residual(y_new) > norm(r); ++k) {
      step *= 0.5;
      y_new = t.periodic ? y - step : std::clamp(y - step, t.lo, t.hi);
    }
    if (std::abs(y_new - y) < 1e-15 * std::max(1.0, std::abs(y))) {
      y = y_new;
      break;
    }
    y = y_new;
  }
  y = t.wrap(y);
  const double r = residual(y);
  if (!(r <= tol)) {
    std::ostringstream os;
    os.precision(17);
    os << "no y with D_x s(x,y) = p at x=(" << x.x1 << "," << x.x2 << ") p=(" << p.x1 << ","
       << p.x2 << "); best residual " << r << " at y=" << y;
    throw Error(ErrorCode::NoPreimage, os.str());
  }
  return y;
}

LegendreResult legendre_dual(const SurplusModel& model, Vec2 x, double p) {
  const TargetDomain& t = model.target();
  constexpr int kScan = 64;
  double best_y = t.lo;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kScan; ++i) {
    const double y = t.lo + t.length() * i / kScan;
    if (!(model.d_yy(x, y) > 0.0)) {
      std::ostringstream os;
      os.precision(17);
      os << "s_yy <= 0 at x=(" << x.x1 << "," << x.x2 << ") y=" << y;
      throw Error(ErrorCode::NotConvex, os.str());
    }
    const double v = y * p - model.value(x, y);
    if (v > best_v) {
      best_v = v;
      best_y = y;
    }
  }
  // Newton on s_y(x,y) = p; the objective is strictly concave.
  double y = best_y;
  for (int it = 0; it < 60; ++it) {
    const double g = p - model.d_y(x, y);
    const double h = model.d_yy(x, y);
    const double y_new = std::clamp(y + g / h, t.lo, t.hi);
    if (std::abs(y_new - y) < 1e-15 * std::max(1.0, std::abs(y))) {
      y = y_new;
      break;
    }
    y = y_new;
  }
  LegendreResult res;
  res.maximizer = y;
  res.value = y * p - model.value(x, y);
  res.interior = y > t.lo && y < t.hi;
  return res;
}

Vec2 SourceDensity::grad(Vec2 x) const {
  if (gradient) return gradient(x);
  constexpr double h = 1e-5;
  const double f0 = value(x);
  return {(value(x + Vec2{h, 0.0}) - f0) / h, (value(x + Vec2{0.0, h}) - f0) / h};
}

SourceDensity SourceDensity::constant(double c) {
  SourceDensity f;
  f.value = [c](Vec2) { return c; };
  f.gradient = [](Vec2) { return Vec2{}; };
  f.lower = f.upper = c;
  return f;
}

TargetDensity TargetDensity::constant(double c) {
  TargetDensity g;
  g.value = [c](double) { return c; };
  g.lower = g.upper = c;
  return g;
}

}  // namespace udot
