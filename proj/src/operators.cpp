#include "udot/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "udot/error.hpp"
#include "udot/io.hpp"
#include "udot/kernels.hpp"

namespace udot {

namespace {

std::string at(double y, double p, double q) {
  std::ostringstream os;
  os.precision(17);
  os << "(y,p,q)=(" << y << "," << p << "," << q << ")";
  return os.str();
}

std::string at(double y, double p, double q, Vec2 x) {
  std::ostringstream os;
  os.precision(17);
  os << at(y, p, q) << " x=(" << x.x1 << "," << x.x2 << ")";
  return os.str();
}

}  // namespace

LevelSlice::LevelSlice(const SurplusModel& model, const Region& region, const SourceDensity& f,
                       double y, double p, int cells)
    : model_(model), f_(f), y_(y), p_(p), x1_(trace_level_set(model, region, y, p, cells)),
      min_syy_(std::numeric_limits<double>::infinity()) {
  for (const auto& s : x1_.segments) {
    min_syy_ = std::min(min_syy_, model_.d_yy(s.midpoint, y_));
    min_syy_ = std::min(min_syy_, model_.d_yy(x1_.nodes[s.a], y_));
    min_syy_ = std::min(min_syy_, model_.d_yy(x1_.nodes[s.b], y_));
  }
}

LevelSetMesh LevelSlice::x2(double q) const { return restrict_sublevel(x1_, model_, q); }

double LevelSlice::G2_on(const LevelSetMesh& x2, double q) const {
  return integrate_over_mesh(x2, [&](Vec2 x) {
    const double a = q - model_.d_yy(x, y_);
    return std::max(a, 0.0) * f_(x) / norm(model_.grad_x_dy(x, y_));
  });
}

double LevelSlice::G1(double q) const {
  return integrate_over_mesh(x1_, [&](Vec2 x) {
    return (q - model_.d_yy(x, y_)) * f_(x) / norm(model_.grad_x_dy(x, y_));
  });
}

double LevelSlice::G2(double q) const { return G2_on(x2(q), q); }

double LevelSlice::dG1_dq() const {
  return integrate_over_mesh(x1_, [&](Vec2 x) { return f_(x) / norm(model_.grad_x_dy(x, y_)); });
}

double LevelSlice::dG2_dq_on(const LevelSetMesh& x2) const {
  return integrate_over_mesh(x2, [&](Vec2 x) { return f_(x) / norm(model_.grad_x_dy(x, y_)); });
}

double LevelSlice::dG2_dq(double q) const { return dG2_dq_on(x2(q)); }

double eval_G2(const SurplusModel& model, const Region& region, const SourceDensity& f,
               OperatorPoint pt, int cells) {
  return LevelSlice(model, region, f, pt.y, pt.p, cells).G2(pt.q);
}

double eval_G1(const SurplusModel& model, const Region& region, const SourceDensity& f,
               OperatorPoint pt, int cells) {
  return LevelSlice(model, region, f, pt.y, pt.p, cells).G1(pt.q);
}

double dG2_dq(const SurplusModel& model, const Region& region, const SourceDensity& f,
              OperatorPoint pt, int cells) {
  return LevelSlice(model, region, f, pt.y, pt.p, cells).dG2_dq(pt.q);
}

double dG1_dq(const SurplusModel& model, const Region& region, const SourceDensity& f,
              OperatorPoint pt, int cells) {
  return LevelSlice(model, region, f, pt.y, pt.p, cells).dG1_dq();
}

namespace {

enum class Direction { P, Y };

// d/dp or d/dy of the integral of a = (q - s_yy) f w over the moving curve X2.
// The curve moves along n_W with speed V (w for p, -s_yy w for y); endpoints
// slide along the boundary of X or along {s_yy = q}.
double moving_derivative(const SurplusModel& model, const Region& region, const SourceDensity& f,
                         OperatorPoint pt, int cells, const DerivativeOptions& opts,
                         Direction dir) {
  const double y = pt.y, q = pt.q;
  const LevelSetMesh x1 = trace_level_set(model, region, y, pt.p, cells);
  const LevelSetMesh x2 = restrict_sublevel(x1, model, q);
  const double h = opts.h_geo;

  auto u_field = [&](Vec2 x) {
    const Vec2 g = model.grad_x_dy(x, y);
    return (1.0 / dot(g, g)) * g;
  };
  auto div_a_nw = [&](Vec2 x) {
    const DerivativeBundle b = model.bundle(x, y);
    const double fx = f(x);
    const Vec2 grad_phi = (-fx) * b.grad_x_yy + (q - b.s_yy) * f.grad(x);
    const Vec2 u = (1.0 / dot(b.grad_x_y, b.grad_x_y)) * b.grad_x_y;
    const double div_u = (u_field({x.x1 + h, x.x2}).x1 - u_field({x.x1 - h, x.x2}).x1 +
                          u_field({x.x1, x.x2 + h}).x2 - u_field({x.x1, x.x2 - h}).x2) /
                         (2.0 * h);
    return dot(grad_phi, u) + (q - b.s_yy) * fx * div_u;
  };
  auto speed = [&](const DerivativeBundle& b) {
    const double w = 1.0 / norm(b.grad_x_y);
    return dir == Direction::P ? w : -b.s_yy * w;
  };

  double interior = integrate_over_mesh(x2, [&](Vec2 x) {
    const DerivativeBundle b = model.bundle(x, y);
    double val = div_a_nw(x) * speed(b);
    if (dir == Direction::Y) {
      const double w = 1.0 / norm(b.grad_x_y);
      const double fx = f(x);
      const double dw_dy = -w * w * w * dot(b.grad_x_y, b.grad_x_yy);
      val += -b.s_yyy * fx * w + (q - b.s_yy) * fx * dw_dy;
    }
    return val;
  });

  auto sine = [&](double c, Vec2 x, const char* what) {
    const double s2 = 1.0 - c * c;
    const double s = std::sqrt(std::max(s2, 0.0));
    if (s < opts.transversality_floor) {
      throw Error(ErrorCode::TransversalityLoss,
                  std::string(what) + " nearly tangent to the level curve at " + at(y, pt.p, q, x));
    }
    return s;
  };

  double points = 0.0;
  for (const auto& hit : x2.boundary_hits) {
    const DerivativeBundle b = model.bundle(hit.x, y);
    const double w = 1.0 / norm(b.grad_x_y);
    const double a = (q - b.s_yy) * f(hit.x) * w;
    const double c = dot(normalized(b.grad_x_y), region.boundary_normal(hit.x));
    points += -a * speed(b) * c / sine(c, hit.x, "boundary of X");
  }
  for (const auto& cut : x2.cut_points) {
    const DerivativeBundle b = model.bundle(cut.x, y);
    const double w = 1.0 / norm(b.grad_x_y);
    const double z = 1.0 / norm(b.grad_x_yy);
    const double a = (q - b.s_yy) * f(cut.x) * w;
    const double c = dot(normalized(b.grad_x_y), normalized(b.grad_x_yy));
    const double v_z = dir == Direction::P ? 0.0 : -b.s_yyy * z;
    points += a * (v_z - speed(b) * c) / sine(c, cut.x, "sublevel cut");
  }
  return interior + points;
}

}  // namespace

double dG2_dp(const SurplusModel& model, const Region& region, const SourceDensity& f,
              OperatorPoint pt, int cells, const DerivativeOptions& opts) {
  return moving_derivative(model, region, f, pt, cells, opts, Direction::P);
}

double dG2_dy(const SurplusModel& model, const Region& region, const SourceDensity& f,
              OperatorPoint pt, int cells, const DerivativeOptions& opts) {
  return moving_derivative(model, region, f, pt, cells, opts, Direction::Y);
}

Inversion invert_G2(const LevelSlice& slice, double beta, const InvertOptions& opts) {
  const double y = slice.y(), p = slice.p();
  if (!(beta > 0.0)) {
    throw Error(ErrorCode::NonPositiveMass, "invert_G2 needs beta > 0, got beta=" +
                                                format_real(beta) + " at (y,p)=(" +
                                                format_real(y) + "," + format_real(p) + ")");
  }
  if (slice.x1().total_length() < opts.length_floor) {
    throw Error(ErrorCode::EmptyLevelSet, "X1 is empty at (y,p)=(" + format_real(y) + "," +
                                              format_real(p) + ")");
  }
  const double tol = opts.rel_tol * beta;
  Inversion res;
  auto eval = [&](double q) {
    ++res.iterations;
    return slice.G2(q);
  };

  double lo = slice.min_s_yy() - 1e-9 * (1.0 + std::abs(slice.min_s_yy()));
  double width = 1.0;
  if (opts.q_guess && *opts.q_guess > lo) width = std::max(width, 2.0 * (*opts.q_guess - lo));
  double hi = lo + width;
  double g_hi = eval(hi);
  while (g_hi < beta) {
    if (res.iterations > opts.max_iterations) {
      throw Error(ErrorCode::BracketFailure,
                  "G2 did not reach beta=" + format_real(beta) + " at " + at(y, p, hi));
    }
    lo = hi;
    width *= 2.0;
    hi = lo + width;
    g_hi = eval(hi);
  }

  double q = 0.5 * (lo + hi);
  if (opts.q_guess && *opts.q_guess > lo && *opts.q_guess < hi) q = *opts.q_guess;
  for (;;) {
    if (res.iterations > opts.max_iterations) {
      throw Error(ErrorCode::BracketFailure,
                  "q-inversion did not converge for beta=" + format_real(beta) + " at " +
                      at(y, p, q));
    }
    const LevelSetMesh x2 = slice.x2(q);
    const double g = slice.G2_on(x2, q);
    ++res.iterations;
    if (std::abs(g - beta) <= tol) {
      res.q = q;
      res.G2 = g;
      return res;
    }
    if (g < beta) lo = q;
    else hi = q;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(q))) {
      res.q = q;
      res.G2 = g;
      return res;
    }
    const double slope = slice.dG2_dq_on(x2);
    double next = q - (g - beta) / slope;
    if (!(slope >= opts.slope_floor) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    q = next;
  }
}


double invert_G2(const SurplusModel& model, const Region& region, const SourceDensity& f,
                 double y, double p, double beta, int cells, const InvertOptions& opts) {
  if (!(beta > 0.0)) {
    throw Error(ErrorCode::NonPositiveMass, "invert_G2 needs beta > 0, got beta=" +
                                                format_real(beta));
  }
  return invert_G2(LevelSlice(model, region, f, y, p, cells), beta, opts).q;
}

Ellipticity ellipticity_constant(const LevelSlice& slice, double q) {
  const LevelSetMesh x2 = slice.x2(q);
  Ellipticity e;
  e.G2 = slice.G2_on(x2, q);
  if (!(e.G2 > 0.0)) {
    throw Error(ErrorCode::NotElliptic,
                "G2 <= 0 at " + at(slice.y(), slice.p(), q) + ", G2=" + format_real(e.G2));
  }
  const SurplusModel& model = slice.model();
  double theta = 0.0;
  for (const auto& s : x2.segments) {
    for (Vec2 x : {s.midpoint, x2.nodes[s.a], x2.nodes[s.b]})
      theta = std::max(theta, q - model.d_yy(x, slice.y()));
  }
  e.theta = theta;
  e.lambda = e.G2 / theta;
  return e;
}

Ellipticity ellipticity_constant(const SurplusModel& model, const Region& region,
                                 const SourceDensity& f, OperatorPoint pt, int cells) {
  return ellipticity_constant(LevelSlice(model, region, f, pt.y, pt.p, cells), pt.q);
}

namespace {

OperatorValues evaluate_one(const SurplusModel& model, const Region& region,
                            const SourceDensity& f, OperatorPoint pt, int cells) {
  const LevelSlice slice(model, region, f, pt.y, pt.p, cells);
  const LevelSetMesh x2 = slice.x2(pt.q);
  OperatorValues out;
  out.pt = pt;
  out.G1 = slice.G1(pt.q);
  out.G2 = slice.G2_on(x2, pt.q);
  out.dG2dq = slice.dG2_dq_on(x2);
  out.lambda = out.G2 > 0.0 ? ellipticity_constant(slice, pt.q).lambda : 0.0;
  return out;
}

}  // namespace

std::vector<OperatorValues> evaluate_batch(const SurplusModel& model, const Region& region,
                                           const SourceDensity& f,
                                           const std::vector<OperatorPoint>& pts, int cells) {
  std::vector<OperatorValues> out(pts.size());
  kernels::parallel_for(pts.size(), [&](std::size_t i) {
    out[i] = evaluate_one(model, region, f, pts[i], cells);
  });
  return out;
}

std::vector<OperatorValues> evaluate_batch_serial(const SurplusModel& model, const Region& region,
                                                  const SourceDensity& f,
                                                  const std::vector<OperatorPoint>& pts,
                                                  int cells) {
  std::vector<OperatorValues> out(pts.size());
  kernels::serial_for(pts.size(), [&](std::size_t i) {
    out[i] = evaluate_one(model, region, f, pts[i], cells);
  });
  return out;
}

void write_operator_csv(const std::filesystem::path& path,
                        const std::vector<OperatorValues>& rows) {
  CsvTable t;
  t.header = {"y", "p", "q", "G1", "G2", "dG2dq", "lambda"};
  for (const auto& r : rows)
    t.rows.push_back({r.pt.y, r.pt.p, r.pt.q, r.G1, r.G2, r.dG2dq, r.lambda});
  write_csv(path, t);
}

}  // namespace udot
