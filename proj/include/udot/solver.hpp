#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "udot/density.hpp"
#include "udot/error.hpp"
#include "udot/io.hpp"
#include "udot/presets.hpp"
#include "udot/region.hpp"
#include "udot/surplus.hpp"

namespace udot {

/// Source and target data plus discretization sizes. Construction checks
/// the density bounds, positivity of g and unit total mass of f and g.
class TransportProblem {
 public:
  TransportProblem(SurplusPtr model, Region region, SourceDensity f, TargetDensity g, int cells,
                   int ode_steps);

  /// Preset data, optionally with s + c y^2/2 in place of s.
  static TransportProblem from_preset(const Preset& preset, int cells, int ode_steps,
                                      double convexify_coefficient = 0.0);

  const SurplusModel& model() const { return *model_; }
  const SurplusPtr& model_ptr() const { return model_; }
  const Region& region() const { return region_; }
  const SourceDensity& f() const { return f_; }
  const TargetDensity& g() const { return g_; }
  const TargetDomain& target() const { return model_->target(); }
  bool periodic() const { return target().periodic; }
  int cells() const { return cells_; }
  int ode_steps() const { return ode_steps_; }
  double source_mass() const { return source_mass_; }
  double target_mass() const { return target_mass_; }

  /// Integral of g over [target.lo, y].
  double target_cdf(double y) const;

 private:
  SurplusPtr model_;
  Region region_;
  SourceDensity f_;
  TargetDensity g_;
  int cells_;
  int ode_steps_;
  double source_mass_ = 0.0;
  double target_mass_ = 0.0;
};

/// Integral of g over [a, b] by composite Simpson.
double integrate_target(const TargetDensity& g, double a, double b, int intervals = 2048);

enum class BoundaryMode { Initial, Nested, PeriodicShooting };

std::string to_string(BoundaryMode mode);
/// Accepts "initial", "nested", "periodic-shooting"; throws Config otherwise.
BoundaryMode parse_boundary_mode(const std::string& name);

struct BoundaryCondition {
  BoundaryMode mode = BoundaryMode::Nested;
  double k0 = 0.0;  // k at the first grid point (Initial) or the first shooting guess
};

/// The default for the target's topology: shooting on a circle, nested otherwise.
BoundaryCondition default_boundary(const TransportProblem& problem);

/// k = v' on a target grid, with v, q = k' and the equation residual.
struct PotentialSolution {
  std::vector<double> y;
  std::vector<double> k;
  std::vector<double> v;  // trapezoidal antiderivative of k, v[0] = 0
  std::vector<double> q_used;
  std::vector<double> residual;  // |G2(y,k,q_used) - g(y)|
  std::map<std::string, double> diagnostics;
  // Per grid point; empty for solutions read back from CSV.
  std::vector<int> x1_components;
  std::vector<int> x2_components;
  std::vector<double> lambda;
  std::vector<double> theta;
  std::vector<double> G2;
  bool periodic = false;
  TargetDomain target;

  std::size_t size() const { return y.size(); }
  /// Smooth v through the stored knots, shaped by k and q_used; quadratic
  /// Taylor beyond the grid, wrapped on a circle.
  double v_at(double y) const;
  double dv_at(double y) const;
  double d2v_at(double y) const;
  /// Piecewise-linear q_used.
  double q_at(double y) const;
  double k_at(double y) const;
};

/// Raised when the march cannot continue; carries the points solved so far.
class SolverAbort : public Error {
 public:
  SolverAbort(ErrorCode code, const std::string& what, PotentialSolution partial);
  const PotentialSolution& partial() const { return partial_; }

 private:
  PotentialSolution partial_;
};

/// k with mass{x : s_y(x,y) <= k} = integral of g up to y, by bisection.
/// Throws BracketFailure when the target mass is outside the attainable range.
double nested_initializer(const TransportProblem& problem, double y);

struct SolveOptions {
  double shooting_tol = 1e-6;
  int shooting_max_steps = 50;
  bool per_point_diagnostics = true;
};

/// RK4 march of k' = q(y, k, g(y)). Throws SolverAbort, ShootingDivergence,
/// BracketFailure, NonPositiveMass.
PotentialSolution solve_ode(const TransportProblem& problem, const BoundaryCondition& bc,
                            const SolveOptions& opts = {});

/// Recomputes v, residuals, component counts, ellipticity and mass diagnostics.
void annotate_solution(const TransportProblem& problem, PotentialSolution& sol, bool per_point);

struct ConjugateValue {
  double u = 0.0;
  double y_star = 0.0;
  bool boundary_argmax = false;
};

/// u(x) = max_y s(x,y) - v(y) and its maximizer.
ConjugateValue assemble_conjugate(const TransportProblem& problem, const PotentialSolution& sol,
                                  Vec2 x);

using TransportMap = std::function<double(Vec2)>;

/// F(x) = argmax from assemble_conjugate.
TransportMap reconstruct_map(const TransportProblem& problem, const PotentialSolution& sol);

/// Max |s_y(x,F(x)) - k(F(x))| over seeded samples whose maximizer is interior.
double map_consistency(const TransportProblem& problem, const PotentialSolution& sol,
                       int n_samples, std::uint64_t seed);

/// Seeded draws from f by rejection in the bounding box. Throws RejectionStall.
std::vector<Vec2> sample_source(const TransportProblem& problem, int n_samples, std::uint64_t seed);

/// Halton points in the region (quasi-uniform, not f-weighted).
std::vector<Vec2> region_samples(const Region& region, int n_samples, std::uint64_t seed);

struct PushforwardReport {
  double tv_distance = 0.0;
  std::vector<double> empirical;  // per bin, sums to 1
  std::vector<double> expected;   // integral of g per bin
  double acceptance_rate = 0.0;
};

PushforwardReport verify_pushforward(const TransportProblem& problem, const TransportMap& F,
                                     int n_samples, int bins, std::uint64_t seed);

struct NonlocalReport {
  double residual = 0.0;
  double integral = 0.0;
  int members = 0;
  int quadrature_points = 0;
};

/// |integral over the argmax set in X1(y,k(y)) of (v'' - s_yy) f w  -  g(y)|.
NonlocalReport verify_nonlocal(const TransportProblem& problem, const PotentialSolution& sol,
                               double y, double membership_tol = 1e-6);

struct JacobianReport {
  double max_relative_error = 0.0;
  int used = 0;
  int excluded = 0;
};

/// JF = |D_x s_y| / (v''(F) - s_yy) against a central difference of F along n_W.
/// Throws EllipticityLoss where the denominator is below 1e-8.
JacobianReport jacobian_check(const TransportProblem& problem, const PotentialSolution& sol,
                              const std::vector<Vec2>& x_samples, double step = 1e-5);

/// min over grid y and X2(y,k,q) points of q - s_yy.
double uniform_ellipticity_margin(const TransportProblem& problem, const PotentialSolution& sol);

/// Trapezoidal integral of the stored G2 values over the target; on an
/// interval the end values are held constant out to the endpoints.
double solution_mass(const PotentialSolution& sol);

/// G2(y, k, q_used) at every grid point, re-evaluated.
std::vector<double> equation_values(const TransportProblem& problem, const PotentialSolution& sol);

/// Columns y,k,v,q_used,residual.
void write_solution_csv(const std::filesystem::path& path, const PotentialSolution& sol);
PotentialSolution read_solution_csv(const std::filesystem::path& path, const TargetDomain& target);
Json solution_diagnostics_json(const PotentialSolution& sol);

}  // namespace udot
