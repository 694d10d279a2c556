#pragma once

#include <cmath>
#include <numbers>

namespace udot {

/// Point or vector in the source plane.
struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x1 += o.x1; x2 += o.x2; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x1 -= o.x1; x2 -= o.x2; return *this; }
  constexpr Vec2& operator*=(double a) { x1 *= a; x2 *= a; return *this; }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return a -= b; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x1, -a.x2}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x1 * b.x1 + a.x2 * b.x2; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x1 * b.x2 - a.x2 * b.x1; }
inline double norm(Vec2 a) { return std::hypot(a.x1, a.x2); }
constexpr Vec2 perp(Vec2 a) { return {-a.x2, a.x1}; }

inline Vec2 normalized(Vec2 a) {
  const double n = norm(a);
  return n > 0.0 ? Vec2{a.x1 / n, a.x2 / n} : Vec2{};
}

/// Axis-aligned rectangle.
struct BBox {
  Vec2 lo;
  Vec2 hi;

  double width() const { return hi.x1 - lo.x1; }
  double height() const { return hi.x2 - lo.x2; }
  bool contains(Vec2 p) const {
    return p.x1 >= lo.x1 && p.x1 <= hi.x1 && p.x2 >= lo.x2 && p.x2 <= hi.x2;
  }
};

/// The one-dimensional target set: an interval, or a circle of length hi - lo.
struct TargetDomain {
  double lo = 0.0;
  double hi = 1.0;
  bool periodic = false;

  double length() const { return hi - lo; }

  /// Maps y into [lo, hi) for periodic targets; identity otherwise.
  double wrap(double y) const {
    if (!periodic) return y;
    const double L = length();
    double t = std::fmod(y - lo, L);
    if (t < 0.0) t += L;
    return lo + t;
  }

  /// Signed difference a - b, reduced to (-L/2, L/2] on a circle.
  double difference(double a, double b) const {
    double d = a - b;
    if (!periodic) return d;
    const double L = length();
    d = std::remainder(d, L);
    return d;
  }

  double distance(double a, double b) const { return std::abs(difference(a, b)); }

  bool contains(double y, double tol = 0.0) const {
    return periodic || (y >= lo - tol && y <= hi + tol);
  }
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace udot
