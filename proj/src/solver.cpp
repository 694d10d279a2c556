#include "udot/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "udot/geometry.hpp"
#include "udot/kernels.hpp"
#include "udot/operators.hpp"
#include "udot/sampling.hpp"

namespace udot {

namespace {

constexpr double kMassTolerance = 1e-3;

std::string real(double v) { return format_real(v); }

}  // namespace

double integrate_target(const TargetDensity& g, double a, double b, int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double sum = g(a) + g(b);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
  return sum * h / 3.0;
}

TransportProblem::TransportProblem(SurplusPtr model, Region region, SourceDensity f,
                                   TargetDensity g, int cells, int ode_steps)
    : model_(std::move(model)), region_(std::move(region)), f_(std::move(f)), g_(std::move(g)),
      cells_(cells), ode_steps_(ode_steps) {
  if (!model_) throw Error(ErrorCode::InvalidArgument, "transport problem without a surplus");
  if (cells_ < 16) throw Error(ErrorCode::InvalidArgument, "cells must be >= 16");
  if (ode_steps_ < 4) throw Error(ErrorCode::InvalidArgument, "ode_steps must be >= 4");
  if (!f_.value || !g_.value) throw Error(ErrorCode::InvalidArgument, "densities must be set");
  if (!(f_.lower > 0.0) || f_.upper < f_.lower) {
    throw Error(ErrorCode::InvalidArgument, "source density bounds need 0 < L_f <= U_f");
  }
  if (!(g_.lower > 0.0) || g_.upper < g_.lower) {
    throw Error(ErrorCode::NonPositiveMass, "target density bounds need 0 < L_g <= U_g, got L_g=" +
                                                real(g_.lower));
  }
  const TargetDomain& t = target();
  const int n_check = 4 * ode_steps_;
  for (int i = 0; i <= n_check; ++i) {
    const double y = t.lo + t.length() * i / n_check;
    const double gy = g_(y);
    if (!(gy > 0.0)) throw Error(ErrorCode::NonPositiveMass, "g(y) <= 0 at y=" + real(y));
    if (gy < g_.lower * (1 - 1e-12) || gy > g_.upper * (1 + 1e-12)) {
      throw Error(ErrorCode::InvalidArgument, "g(y) outside [L_g, U_g] at y=" + real(y));
    }
  }
  for (const auto& x : region_samples(region_, 1024, 11)) {
    const double fx = f_(x);
    if (fx < f_.lower * (1 - 1e-12) || fx > f_.upper * (1 + 1e-12)) {
      throw Error(ErrorCode::InvalidArgument, "f(x) outside [L_f, U_f] at x=(" + real(x.x1) + "," +
                                                  real(x.x2) + ")");
    }
  }
  source_mass_ = region_mass(region_, f_, std::max(cells_, 64));
  target_mass_ = integrate_target(g_, t.lo, t.hi);
  if (std::abs(source_mass_ - 1.0) > kMassTolerance) {
    throw Error(ErrorCode::InvalidArgument, "integral of f is " + real(source_mass_) + ", not 1");
  }
  if (std::abs(target_mass_ - 1.0) > kMassTolerance) {
    throw Error(ErrorCode::InvalidArgument, "integral of g is " + real(target_mass_) + ", not 1");
  }
}

TransportProblem TransportProblem::from_preset(const Preset& preset, int cells, int ode_steps,
                                               double convexify_coefficient) {
  return TransportProblem(convexify(preset.model, convexify_coefficient), preset.region, preset.f,
                          preset.g, cells, ode_steps);
}

double TransportProblem::target_cdf(double y) const {
  const double lo = target().lo;
  if (y <= lo) return 0.0;
  const int n = std::max(64, static_cast<int>(2048 * (y - lo) / target().length()));
  return integrate_target(g_, lo, y, n);
}

std::string to_string(BoundaryMode mode) {
  switch (mode) {
    case BoundaryMode::Initial: return "initial";
    case BoundaryMode::Nested: return "nested";
    case BoundaryMode::PeriodicShooting: return "periodic-shooting";
  }
  return "?";
}

BoundaryMode parse_boundary_mode(const std::string& name) {
  if (name == "initial") return BoundaryMode::Initial;
  if (name == "nested") return BoundaryMode::Nested;
  if (name == "periodic-shooting") return BoundaryMode::PeriodicShooting;
  throw Error(ErrorCode::Config, "unknown boundary mode '" + name +
                                     "' (expected initial, nested or periodic-shooting)");
}

BoundaryCondition default_boundary(const TransportProblem& problem) {
  BoundaryCondition bc;
  bc.mode = problem.periodic() ? BoundaryMode::PeriodicShooting : BoundaryMode::Nested;
  return bc;
}

// ---------------------------------------------------------------------------
// Interpolation on the solution grid.

namespace {

// Interval index j with y[j] <= t <= y[j+1].
std::size_t locate(const std::vector<double>& y, double t) {
  auto it = std::upper_bound(y.begin(), y.end(), t);
  std::size_t j = it == y.begin() ? 0 : static_cast<std::size_t>(it - y.begin()) - 1;
  return std::min(j, y.size() - 2);
}

struct Hermite {
  double v, dv, d2v;
};

// k is interpolated by the C1 cubic with slopes q_used and v by its
// antiderivative, plus a linear correction so v passes through the stored knots.
Hermite hermite(const PotentialSolution& s, double t) {
  const std::size_t n = s.y.size();
  if (!s.periodic && (t < s.y.front() || t > s.y.back())) {
    const std::size_t e = t < s.y.front() ? 0 : n - 1;
    const double d = t - s.y[e];
    const double q = s.q_used[e];
    return {s.v[e] + s.k[e] * d + 0.5 * q * d * d, s.k[e] + q * d, q};
  }
  const std::size_t j = locate(s.y, t);
  const double h = s.y[j + 1] - s.y[j];
  const double u = (t - s.y[j]) / h;
  const double k0 = s.k[j], k1 = s.k[j + 1], m0 = s.q_used[j] * h, m1 = s.q_used[j + 1] * h;
  const double u2 = u * u, u3 = u2 * u, u4 = u3 * u;
  const double integral = (u - u3 + 0.5 * u4) * k0 + (0.5 * u2 - 2.0 / 3.0 * u3 + 0.25 * u4) * m0 +
                          (u3 - 0.5 * u4) * k1 + (-u3 / 3.0 + 0.25 * u4) * m1;
  const double full = 0.5 * (k0 + k1) + (m0 - m1) / 12.0;
  const double correction = (s.v[j + 1] - s.v[j]) / h - full;
  const double k = (2 * u3 - 3 * u2 + 1) * k0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * k1 +
                   (u3 - u2) * m1;
  const double dk = (6 * u2 - 6 * u) * k0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * k1 +
                    (3 * u2 - 2 * u) * m1;
  return {s.v[j] + h * (integral + u * correction), k + correction, dk / h};
}

double linear(const std::vector<double>& y, const std::vector<double>& f, double t) {
  if (t <= y.front()) return f.front();
  if (t >= y.back()) return f.back();
  const std::size_t j = locate(y, t);
  const double u = (t - y[j]) / (y[j + 1] - y[j]);
  return (1 - u) * f[j] + u * f[j + 1];
}

double grid_coordinate(const PotentialSolution& s, double t) {
  if (!s.periodic) return t;
  const double w = s.target.wrap(t);
  return w < s.y.front() ? w + s.target.length() : w;
}

}  // namespace

double PotentialSolution::v_at(double t) const { return hermite(*this, grid_coordinate(*this, t)).v; }
double PotentialSolution::dv_at(double t) const {
  return hermite(*this, grid_coordinate(*this, t)).dv;
}
double PotentialSolution::d2v_at(double t) const {
  return hermite(*this, grid_coordinate(*this, t)).d2v;
}
double PotentialSolution::q_at(double t) const {
  return linear(y, q_used, grid_coordinate(*this, t));
}
double PotentialSolution::k_at(double t) const { return linear(y, k, grid_coordinate(*this, t)); }

SolverAbort::SolverAbort(ErrorCode code, const std::string& what, PotentialSolution partial)
    : Error(code, what), partial_(std::move(partial)) {}

// ---------------------------------------------------------------------------
// Boundary data.

namespace {

std::pair<double, double> s_y_range(const TransportProblem& problem, double y) {
  const auto lat = kernels::make_lattice(problem.region().bbox(), problem.cells());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int j = 0; j <= lat.cells; ++j) {
    for (int i = 0; i <= lat.cells; ++i) {
      const Vec2 x = lat.node(i, j);
      if (!problem.region().contains(x, 0.5 * std::max(lat.hx, lat.hy))) continue;
      const double sy = problem.model().d_y(x, y);
      lo = std::min(lo, sy);
      hi = std::max(hi, sy);
    }
  }
  const double pad = 1e-3 * (hi - lo) + 1e-12;
  return {lo - pad, hi + pad};
}

}  // namespace

double nested_initializer(const TransportProblem& problem, double y) {
  const double target = problem.target_cdf(y) * problem.source_mass();
  auto mass = [&](double k) {
    return sublevel_mass(problem.model(), problem.region(), problem.f(), y, k, std::nullopt,
                         problem.cells());
  };
  auto [lo, hi] = s_y_range(problem, y);
  const double m_lo = mass(lo), m_hi = mass(hi);
  const double slack = 1e-9;
  if (target < m_lo - slack || target > m_hi + slack) {
    throw Error(ErrorCode::BracketFailure,
                "nested mass " + real(target) + " outside [" + real(m_lo) + "," + real(m_hi) +
                    "] at y=" + real(y));
  }
  if (target < m_lo) return lo;
  if (target >= m_hi) return hi;
  // Smallest k whose mass exceeds the target: zero mass lands on ess inf s_y.
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) <= target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// March.

namespace {

struct Marcher {
  const TransportProblem& problem;
  double last_q = std::numeric_limits<double>::quiet_NaN();

  double rate(double y, double k) {
    const double yw = problem.target().wrap(y);
    const LevelSlice slice(problem.model(), problem.region(), problem.f(), yw, k, problem.cells());
    InvertOptions opts;
    if (std::isfinite(last_q)) opts.q_guess = last_q;
    const double q = invert_G2(slice, problem.g()(yw), opts).q;
    last_q = q;
    return q;
  }

  // One RK4 step from (y, k) with k'(y) = q0 known.
  double rk4(double y, double k, double q0, double h) {
    const double k2 = rate(y + 0.5 * h, k + 0.5 * h * q0);
    const double k3 = rate(y + 0.5 * h, k + 0.5 * h * k2);
    const double k4 = rate(y + h, k + h * k3);
    return k + h / 6.0 * (q0 + 2.0 * k2 + 2.0 * k3 + k4);
  }
};

struct MarchResult {
  std::vector<double> k;
  std::vector<double> q;
  bool complete = true;
  std::string failure;
  ErrorCode code = ErrorCode::EmptyLevelSet;
};

// Marches over ys from k(ys[0]) = k0. Stops at the first step that fails twice.
MarchResult march(const TransportProblem& problem, const std::vector<double>& ys, double k0) {
  Marcher m{problem};
  MarchResult r;
  r.k.push_back(k0);
  try {
    r.q.push_back(m.rate(ys[0], k0));
  } catch (const Error& e) {
    r.k.clear();
    r.complete = false;
    r.failure = e.what();
    r.code = e.code();
    return r;
  }
  for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
    const double y = ys[i], h = ys[i + 1] - ys[i];
    double k_next;
    try {
      try {
        k_next = m.rk4(y, r.k[i], r.q[i], h);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyLevelSet) throw;
        const double k_half = m.rk4(y, r.k[i], r.q[i], 0.5 * h);
        const double q_half = m.rate(y + 0.5 * h, k_half);
        k_next = m.rk4(y + 0.5 * h, k_half, q_half, 0.5 * h);
      }
      r.q.push_back(m.rate(ys[i + 1], k_next));
      r.k.push_back(k_next);
    } catch (const Error& e) {
      r.complete = false;
      r.failure = std::string(e.what()) + " (march from y=" + real(y) + ")";
      r.code = e.code();
      break;
    }
  }
  return r;
}

std::vector<double> target_grid(const TransportProblem& problem) {
  const TargetDomain& t = problem.target();
  const int n = problem.ode_steps();
  const double h = t.length() / n;
  std::vector<double> ys;
  if (t.periodic) {
    for (int i = 0; i <= n; ++i) ys.push_back(t.lo + i * h);
  } else {
    for (int i = 1; i < n; ++i) ys.push_back(t.lo + i * h);
  }
  return ys;
}

}  // namespace

PotentialSolution solve_ode(const TransportProblem& problem, const BoundaryCondition& bc,
                            const SolveOptions& opts) {
  const std::vector<double> ys = target_grid(problem);
  if (bc.mode == BoundaryMode::PeriodicShooting && !problem.periodic()) {
    throw Error(ErrorCode::Config, "periodic-shooting needs a periodic target");
  }
  if (bc.mode != BoundaryMode::PeriodicShooting && problem.periodic()) {
    throw Error(ErrorCode::Config, "periodic targets need the periodic-shooting boundary mode");
  }

  PotentialSolution sol;
  sol.periodic = problem.periodic();
  sol.target = problem.target();
  sol.diagnostics["ode_steps"] = problem.ode_steps();
  sol.diagnostics["cells"] = problem.cells();

  MarchResult result;
  if (bc.mode == BoundaryMode::PeriodicShooting) {
    auto shoot = [&](double k0) { return march(problem, ys, k0); };
    double a = bc.k0;
    result = shoot(a);
    int steps = 0;
    if (result.complete) {
      double ra = result.k.back() - a;
      if (std::abs(ra) > opts.shooting_tol) {
        double b = a + 1e-3;
        MarchResult rb = shoot(b);
        while (rb.complete) {
          const double r_b = rb.k.back() - b;
          result = rb;
          if (std::abs(r_b) <= opts.shooting_tol) break;
          if (++steps >= opts.shooting_max_steps) {
            throw Error(ErrorCode::ShootingDivergence,
                        "periodic shooting did not converge in " +
                            std::to_string(opts.shooting_max_steps) + " steps, residual " +
                            real(r_b) + " at k0=" + real(b));
          }
          const double denom = r_b - ra;
          if (denom == 0.0) {
            throw Error(ErrorCode::ShootingDivergence,
                        "flat shooting residual at k0=" + real(b) + ", residual " + real(r_b));
          }
          const double c = b - r_b * (b - a) / denom;
          a = b;
          ra = r_b;
          b = c;
          rb = shoot(b);
        }
        if (!rb.complete) result = rb;
      }
    }
    sol.diagnostics["shooting_steps"] = steps;
    if (result.complete) sol.diagnostics["shooting_residual"] = result.k.back() - result.k.front();
  } else {
    double k0 = bc.k0;
    if (bc.mode == BoundaryMode::Nested) {
      k0 = nested_initializer(problem, ys.front());
      sol.diagnostics["nested_initial_k"] = k0;
    }
    result = march(problem, ys, k0);
  }

  sol.y.assign(ys.begin(), ys.begin() + static_cast<long>(result.k.size()));
  sol.k = result.k;
  sol.q_used = result.q;
  if (!result.complete) {
    if (!sol.y.empty()) annotate_solution(problem, sol, false);
    throw SolverAbort(result.code, "march aborted: " + result.failure, std::move(sol));
  }
  annotate_solution(problem, sol, opts.per_point_diagnostics);
  return sol;
}

// ---------------------------------------------------------------------------
// Diagnostics.

double solution_mass(const PotentialSolution& s) {
  const std::size_t n = s.y.size();
  if (n == 0 || s.G2.size() != n) return 0.0;
  double m = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) m += 0.5 * (s.y[i + 1] - s.y[i]) * (s.G2[i] + s.G2[i + 1]);
  if (!s.periodic) {
    m += (s.y.front() - s.target.lo) * s.G2.front();
    m += (s.target.hi - s.y.back()) * s.G2.back();
  }
  return m;
}

std::vector<double> equation_values(const TransportProblem& problem,
                                    const PotentialSolution& sol) {
  std::vector<double> out(sol.y.size(), 0.0);
  kernels::parallel_for(sol.y.size(), [&](std::size_t i) {
    const double y = problem.target().wrap(sol.y[i]);
    const LevelSlice slice(problem.model(), problem.region(), problem.f(), y, sol.k[i],
                           problem.cells());
    out[i] = slice.G2(sol.q_used[i]);
  });
  return out;
}

void annotate_solution(const TransportProblem& problem, PotentialSolution& sol, bool per_point) {
  const std::size_t n = sol.y.size();
  sol.v.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    sol.v[i] = sol.v[i - 1] + 0.5 * (sol.y[i] - sol.y[i - 1]) * (sol.k[i] + sol.k[i - 1]);

  sol.residual.assign(n, 0.0);
  sol.G2.assign(n, 0.0);
  sol.x1_components.assign(n, 0);
  sol.x2_components.assign(n, 0);
  sol.lambda.assign(n, 0.0);
  sol.theta.assign(n, 0.0);
  std::vector<double> margin(n, std::numeric_limits<double>::infinity());
  std::vector<double> swept(n, 0.0);
  const SurplusModel& model = problem.model();

  kernels::parallel_for(n, [&](std::size_t i) {
    const double y = problem.target().wrap(sol.y[i]);
    const double q = sol.q_used[i];
    const LevelSlice slice(model, problem.region(), problem.f(), y, sol.k[i], problem.cells());
    const LevelSetMesh x2 = slice.x2(q);
    sol.G2[i] = slice.G2_on(x2, q);
    sol.residual[i] = std::abs(sol.G2[i] - problem.g()(y));
    if (!per_point) return;
    sol.x1_components[i] = count_components(slice.x1());
    sol.x2_components[i] = count_components(x2);
    if (sol.G2[i] > 0.0) {
      const Ellipticity e = ellipticity_constant(slice, q);
      sol.lambda[i] = e.lambda;
      sol.theta[i] = e.theta;
    }
    for (const auto& s : x2.segments)
      for (Vec2 x : {s.midpoint, x2.nodes[s.a], x2.nodes[s.b]})
        margin[i] = std::min(margin[i], q - model.d_yy(x, y));
    swept[i] = integrate_over_mesh(
        x2, [&](Vec2 x) { return (q - model.d_yy(x, y)) / norm(model.grad_x_dy(x, y)); });
  });

  auto& d = sol.diagnostics;
  d["grid_points"] = static_cast<double>(n);
  d["max_residual"] = n ? *std::max_element(sol.residual.begin(), sol.residual.end()) : 0.0;
  d["mass"] = solution_mass(sol);
  d["mass_residual"] = std::abs(d["mass"] - 1.0);
  double min_dk = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) min_dk = std::min(min_dk, sol.k[i + 1] - sol.k[i]);
  if (n > 1) d["min_k_increment"] = min_dk;
  if (sol.periodic && n > 1) d["v_periodicity_defect"] = sol.v.back() - sol.v.front();
  if (!per_point || n == 0) return;

  d["uniform_ellipticity_margin"] = *std::min_element(margin.begin(), margin.end());
  d["x1_components_min"] = *std::min_element(sol.x1_components.begin(), sol.x1_components.end());
  d["x1_components_max"] = *std::max_element(sol.x1_components.begin(), sol.x1_components.end());
  d["x2_components_min"] = *std::min_element(sol.x2_components.begin(), sol.x2_components.end());
  d["x2_components_max"] = *std::max_element(sol.x2_components.begin(), sol.x2_components.end());
  d["lambda_min"] = *std::min_element(sol.lambda.begin(), sol.lambda.end());
  d["theta_max"] = *std::max_element(sol.theta.begin(), sol.theta.end());
  // Swept area between neighbours against the change in k.
  double c1 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dk = std::abs(sol.k[i + 1] - sol.k[i]);
    if (dk <= 1e-14) continue;
    const double vol = 0.5 * (sol.y[i + 1] - sol.y[i]) * (swept[i] + swept[i + 1]);
    c1 = std::min(c1, vol / dk);
  }
  if (std::isfinite(c1)) d["swept_volume_c1"] = c1;
}

double uniform_ellipticity_margin(const TransportProblem& problem, const PotentialSolution& sol) {
  const SurplusModel& model = problem.model();
  std::vector<double> margin(sol.y.size(), std::numeric_limits<double>::infinity());
  kernels::parallel_for(sol.y.size(), [&](std::size_t i) {
    const double y = problem.target().wrap(sol.y[i]);
    const double q = sol.q_used[i];
    const LevelSlice slice(model, problem.region(), problem.f(), y, sol.k[i], problem.cells());
    const LevelSetMesh x2 = slice.x2(q);
    for (const auto& s : x2.segments)
      for (Vec2 x : {s.midpoint, x2.nodes[s.a], x2.nodes[s.b]})
        margin[i] = std::min(margin[i], q - model.d_yy(x, y));
  });
  return margin.empty() ? 0.0 : *std::min_element(margin.begin(), margin.end());
}

// ---------------------------------------------------------------------------
// Conjugate and map.

ConjugateValue assemble_conjugate(const TransportProblem& problem, const PotentialSolution& sol,
                                  Vec2 x) {
  const SurplusModel& model = problem.model();
  const TargetDomain& t = problem.target();
  std::vector<double> cand;
  if (!t.periodic) cand.push_back(t.lo);
  const std::size_t m = sol.periodic ? sol.y.size() - 1 : sol.y.size();
  cand.insert(cand.end(), sol.y.begin(), sol.y.begin() + static_cast<long>(m));
  if (!t.periodic) cand.push_back(t.hi);

  auto phi = [&](double y) { return model.value(x, t.wrap(y)) - sol.v_at(y); };
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const double val = phi(cand[i]);
    if (val > best_val) {
      best_val = val;
      best = i;
    }
  }
  double a, b;
  if (t.periodic) {
    const double h = t.length() / static_cast<double>(m);
    a = cand[best] - h;
    b = cand[best] + h;
  } else {
    a = cand[best == 0 ? 0 : best - 1];
    b = cand[std::min(best + 1, cand.size() - 1)];
  }
  double y_best = cand[best];

  // Golden section on [a, b].
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = phi(c), fd = phi(d);
  for (int it = 0; it < 80 && b - a > 1e-13 * (1.0 + std::abs(a)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = phi(d);
    }
  }
  const double y_gs = fc >= fd ? c : d;
  const double f_gs = std::max(fc, fd);
  if (f_gs > best_val) {
    best_val = f_gs;
    y_best = y_gs;
  }

  // Newton on s_y - v' = 0. Near the maximum phi is flat to rounding, so
  // a converged Newton point is kept unless it is clearly worse.
  double yn = y_best;
  bool converged = false;
  for (int it = 0; it < 8; ++it) {
    const double yw = t.wrap(yn);
    const double g1 = model.d_y(x, yw) - sol.dv_at(yn);
    const double g2 = model.d_yy(x, yw) - sol.d2v_at(yn);
    if (!(g2 < 0.0)) break;
    const double step = g1 / g2;
    yn -= step;
    if (!t.periodic) yn = std::clamp(yn, t.lo, t.hi);
    if (std::abs(step) < 1e-14 * (1.0 + std::abs(yn))) {
      converged = true;
      break;
    }
  }
  const double fn = phi(yn);
  const double slack = converged ? 1e-13 * (1.0 + std::abs(best_val)) : 0.0;
  if (fn >= best_val - slack && std::abs(t.difference(yn, y_best)) < 1e-3 * t.length()) {
    best_val = std::max(fn, best_val);
    y_best = yn;
  }

  ConjugateValue out;
  out.u = best_val;
  out.y_star = t.wrap(y_best);
  const double edge = 1e-9 * t.length();
  out.boundary_argmax = !t.periodic && (y_best <= t.lo + edge || y_best >= t.hi - edge);
  return out;
}

TransportMap reconstruct_map(const TransportProblem& problem, const PotentialSolution& sol) {
  return [problem, sol](Vec2 x) { return assemble_conjugate(problem, sol, x).y_star; };
}

std::vector<Vec2> region_samples(const Region& region, int n_samples, std::uint64_t seed) {
  HaltonSampler hs(2, seed);
  const BBox& b = region.bbox();
  std::vector<Vec2> out;
  std::size_t tries = 0;
  while (static_cast<int>(out.size()) < n_samples) {
    const auto u = hs.next();
    const Vec2 x{b.lo.x1 + u[0] * b.width(), b.lo.x2 + u[1] * b.height()};
    if (region.contains(x)) out.push_back(x);
    if (++tries > 1000u * static_cast<std::size_t>(n_samples) + 100000u) {
      throw Error(ErrorCode::RejectionStall, "region occupies too little of its bounding box");
    }
  }
  return out;
}

double map_consistency(const TransportProblem& problem, const PotentialSolution& sol,
                       int n_samples, std::uint64_t seed) {
  const auto xs = region_samples(problem.region(), n_samples, seed);
  std::vector<double> err(xs.size(), 0.0);
  kernels::parallel_for(xs.size(), [&](std::size_t i) {
    const ConjugateValue c = assemble_conjugate(problem, sol, xs[i]);
    if (c.boundary_argmax) return;
    err[i] = std::abs(problem.model().d_y(xs[i], c.y_star) - sol.dv_at(c.y_star));
  });
  return err.empty() ? 0.0 : *std::max_element(err.begin(), err.end());
}

// ---------------------------------------------------------------------------
// Verification.

std::vector<Vec2> sample_source(const TransportProblem& problem, int n_samples,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const BBox& b = problem.region().bbox();
  const double upper = problem.f().upper;
  std::vector<Vec2> out;
  out.reserve(n_samples);
  std::size_t attempts = 0;
  while (static_cast<int>(out.size()) < n_samples) {
    ++attempts;
    const Vec2 x{b.lo.x1 + unit(rng) * b.width(), b.lo.x2 + unit(rng) * b.height()};
    const double accept = unit(rng) * upper;
    if (problem.region().contains(x) && accept <= problem.f()(x)) out.push_back(x);
    if (attempts >= 10000 && static_cast<double>(out.size()) < 1e-3 * attempts) {
      throw Error(ErrorCode::RejectionStall,
                  "rejection acceptance rate below 1e-3 after " + std::to_string(attempts) +
                      " draws");
    }
  }
  return out;
}

PushforwardReport verify_pushforward(const TransportProblem& problem, const TransportMap& F,
                                     int n_samples, int bins, std::uint64_t seed) {
  if (bins < 1) throw Error(ErrorCode::InvalidArgument, "bins must be >= 1");
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  const TargetDomain& t = problem.target();
  const auto xs = sample_source(problem, n_samples, seed);
  std::vector<double> ys(xs.size());
  kernels::parallel_for(xs.size(), [&](std::size_t i) { ys[i] = F(xs[i]); });

  PushforwardReport rep;
  rep.empirical.assign(bins, 0.0);
  rep.expected.assign(bins, 0.0);
  for (double y : ys) {
    const double u = (t.wrap(y) - t.lo) / t.length();
    const int b = std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
    rep.empirical[b] += 1.0 / static_cast<double>(ys.size());
  }
  const double total = problem.target_mass();
  for (int b = 0; b < bins; ++b) {
    rep.expected[b] = integrate_target(problem.g(), t.lo + t.length() * b / bins,
                                       t.lo + t.length() * (b + 1) / bins, 64) /
                      total;
    rep.tv_distance += 0.5 * std::abs(rep.empirical[b] - rep.expected[b]);
  }
  rep.acceptance_rate = 1.0;  // sample_source throws below its floor
  return rep;
}

NonlocalReport verify_nonlocal(const TransportProblem& problem, const PotentialSolution& sol,
                               double y, double membership_tol) {
  const SurplusModel& model = problem.model();
  const double yw = problem.target().wrap(y);
  const double k = sol.k_at(y);
  const double q = sol.q_at(y);
  const LevelSetMesh x1 = trace_level_set(model, problem.region(), yw, k, problem.cells());
  const std::size_t m = sol.periodic ? sol.y.size() - 1 : sol.y.size();
  const double vy = sol.v_at(y);

  NonlocalReport rep;
  rep.quadrature_points = static_cast<int>(x1.segments.size());
  std::vector<double> contrib(x1.segments.size(), 0.0);
  std::vector<char> member(x1.segments.size(), 0);
  kernels::parallel_for(x1.segments.size(), [&](std::size_t i) {
    const Vec2 x = x1.segments[i].midpoint;
    double grid_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      grid_max = std::max(grid_max, model.value(x, problem.target().wrap(sol.y[j])) - sol.v[j]);
    if (model.value(x, yw) - vy < grid_max - membership_tol) return;
    member[i] = 1;
    contrib[i] = x1.segments[i].weight * (q - model.d_yy(x, yw)) * problem.f()(x) /
                 norm(model.grad_x_dy(x, yw));
  });
  for (std::size_t i = 0; i < contrib.size(); ++i) {
    rep.integral += contrib[i];
    rep.members += member[i];
  }
  rep.residual = std::abs(rep.integral - problem.g()(yw));
  return rep;
}

JacobianReport jacobian_check(const TransportProblem& problem, const PotentialSolution& sol,
                              const std::vector<Vec2>& x_samples, double step) {
  const SurplusModel& model = problem.model();
  const TargetDomain& t = problem.target();
  std::vector<double> err(x_samples.size(), -1.0);
  kernels::parallel_for(x_samples.size(), [&](std::size_t i) {
    const Vec2 x = x_samples[i];
    const ConjugateValue c = assemble_conjugate(problem, sol, x);
    if (c.boundary_argmax) return;
    if (!t.periodic && (c.y_star <= sol.y.front() || c.y_star >= sol.y.back())) return;
    const DerivativeBundle b = model.bundle(x, c.y_star);
    const double denom = sol.q_at(c.y_star) - b.s_yy;
    if (denom < 1e-8) {
      throw Error(ErrorCode::EllipticityLoss,
                  "v''(F) - s_yy = " + real(denom) + " at x=(" + real(x.x1) + "," + real(x.x2) +
                      "), y=" + real(c.y_star));
    }
    const double jf = norm(b.grad_x_y) / denom;
    const Vec2 n = normalized(b.grad_x_y);
    const ConjugateValue fp = assemble_conjugate(problem, sol, x + step * n);
    const ConjugateValue fm = assemble_conjugate(problem, sol, x - step * n);
    if (fp.boundary_argmax || fm.boundary_argmax) return;
    const double fd = t.difference(fp.y_star, fm.y_star) / (2.0 * step);
    err[i] = std::abs(fd - jf) / std::abs(jf);
  });
  JacobianReport rep;
  for (double e : err) {
    if (e < 0.0) {
      ++rep.excluded;
    } else {
      ++rep.used;
      rep.max_relative_error = std::max(rep.max_relative_error, e);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Export.

void write_solution_csv(const std::filesystem::path& path, const PotentialSolution& sol) {
  CsvTable t;
  t.header = {"y", "k", "v", "q_used", "residual"};
  for (std::size_t i = 0; i < sol.y.size(); ++i) {
    t.rows.push_back({sol.y[i], sol.k[i], i < sol.v.size() ? sol.v[i] : 0.0, sol.q_used[i],
                      i < sol.residual.size() ? sol.residual[i] : 0.0});
  }
  write_csv(path, t);
}

PotentialSolution read_solution_csv(const std::filesystem::path& path, const TargetDomain& target) {
  const CsvTable t = read_csv(path);
  PotentialSolution sol;
  sol.y = t.column_values("y");
  sol.k = t.column_values("k");
  sol.v = t.column_values("v");
  sol.q_used = t.column_values("q_used");
  sol.residual = t.column_values("residual");
  sol.periodic = target.periodic;
  sol.target = target;
  if (sol.y.size() < 2) throw Error(ErrorCode::Config, path.string() + " has fewer than 2 rows");
  for (std::size_t i = 1; i < sol.y.size(); ++i) {
    if (!(sol.y[i] > sol.y[i - 1]))
      throw Error(ErrorCode::Config, path.string() + ": y column is not increasing");
  }
  return sol;
}

Json solution_diagnostics_json(const PotentialSolution& sol) {
  Json j = Json::object();
  for (const auto& [key, value] : sol.diagnostics) j[key] = value;
  if (!sol.x1_components.empty() && sol.lambda.size() == sol.y.size()) {
    Json per = Json::array();
    for (std::size_t i = 0; i < sol.y.size(); ++i) {
      per.push_back({{"y", sol.y[i]},
                     {"x1_components", sol.x1_components[i]},
                     {"x2_components", sol.x2_components[i]},
                     {"lambda", sol.lambda[i]},
                     {"theta", sol.theta[i]},
                     {"G2", sol.G2[i]}});
    }
    j["per_point"] = per;
  }
  return j;
}

}  // namespace udot
