#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "udot/error.hpp"
#include "udot/region.hpp"
#include "udot/types.hpp"

namespace udot {

/// Value of the surplus s(x,y) and the derivatives the operators need.
struct DerivativeBundle {
  double s = 0.0;
  double s_y = 0.0;
  double s_yy = 0.0;
  double s_yyy = 0.0;
  Vec2 grad_x;     // D_x s
  Vec2 grad_x_y;   // D_x s_y
  Vec2 grad_x_yy;  // D_x s_yy
};

/// Surplus s : X x Y -> R with hand-coded analytic derivatives.
///
/// Implementations are immutable and safe to evaluate from several threads.
/// For periodic targets y is an angle and all y-arithmetic is mod the period.
class SurplusModel {
 public:
  virtual ~SurplusModel() = default;

  virtual DerivativeBundle bundle(Vec2 x, double y) const = 0;

  // Single-quantity accessors. The defaults go through bundle(); models
  // override the ones on hot paths.
  virtual double value(Vec2 x, double y) const { return bundle(x, y).s; }
  virtual double d_y(Vec2 x, double y) const { return bundle(x, y).s_y; }
  virtual double d_yy(Vec2 x, double y) const { return bundle(x, y).s_yy; }
  virtual double d_yyy(Vec2 x, double y) const { return bundle(x, y).s_yyy; }
  virtual Vec2 grad_x(Vec2 x, double y) const { return bundle(x, y).grad_x; }
  virtual Vec2 grad_x_dy(Vec2 x, double y) const { return bundle(x, y).grad_x_y; }
  virtual Vec2 grad_x_dyy(Vec2 x, double y) const { return bundle(x, y).grad_x_yy; }

  const std::string& label() const { return label_; }
  const TargetDomain& target() const { return target_; }

 protected:
  SurplusModel(std::string label, TargetDomain target);

 private:
  std::string label_;
  TargetDomain target_;
};

using SurplusPtr = std::shared_ptr<const SurplusModel>;

/// s(x,y) = x . (cos y, sin y) on the circle y in [0, 2pi).
SurplusPtr make_bilinear_circle_surplus();
/// s(x,y) = x1 y on y in [0,1].
SurplusPtr make_strip_surplus();
/// s(x,y) = x1 y + x2 y^2 / 2 on y in [0,1].
SurplusPtr make_tilted_surplus();
/// Wraps a user-supplied bundle function.
SurplusPtr make_surplus(std::string label, TargetDomain target,
                        std::function<DerivativeBundle(Vec2, double)> fn);
/// s + c y^2 / 2. Rejects periodic targets, where the added term is not periodic.
SurplusPtr convexify(SurplusPtr base, double coefficient);

/// Pure evaluation of all seven analytic values.
DerivativeBundle eval_bundle(const SurplusModel& model, Vec2 x, double y);

/// Largest relative discrepancy between the analytic bundle and central
/// differences of the lower-order quantities, over seeded samples.
double max_finite_difference_error(const SurplusModel& model, const Region& region,
                                   int n_samples, std::uint64_t seed, double step = 1e-4);

struct MarginReport {
  double min_value = 0.0;
  Vec2 argmin_x;
  double argmin_y = 0.0;
  std::optional<double> argmin_y_bar;  // second target point, enhanced twist only
  int samples_used = 0;
};

/// Thrown when a sampled margin falls below its floor; carries the report.
class ZeroMarginError : public Error {
 public:
  ZeroMarginError(const std::string& what, MarginReport report);
  const MarginReport& report() const { return report_; }

 private:
  MarginReport report_;
};

struct MarginOptions {
  int n_samples = 4096;
  std::uint64_t seed = 1;
  double floor = 1e-8;
};

/// Minimum of |D_x s_y| over quasi-random samples of X x Y.
MarginReport check_nondegeneracy(const SurplusModel& model, const Region& region,
                                 const MarginOptions& opts = {});

/// Minimum over sampled (x, y, ybar) of the part of D_x s(x,y) - D_x s(x,ybar)
/// orthogonal to D_x s_y(x,ybar), divided by |y - ybar|.
MarginReport check_enhanced_twist(const SurplusModel& model, const Region& region,
                                  const MarginOptions& opts = {});

/// The y whose D_x s(x,y) equals p (the s-exponential). Throws NoPreimage
/// when the best residual exceeds tol.
double s_exp(const SurplusModel& model, Vec2 x, Vec2 p, double tol = 1e-8);

struct LegendreResult {
  double value = 0.0;      // s*(x,p) = sup_y (y p - s(x,y))
  double maximizer = 0.0;  // y*
  bool interior = true;    // false when y* is an endpoint of the target interval
};

/// Legendre transform of s(x, .) in y. Throws NotConvex when sampled s_yy <= 0.
LegendreResult legendre_dual(const SurplusModel& model, Vec2 x, double p);

}  // namespace udot
