#pragma once

#include <cstddef>
#include <vector>

#include "udot/io.hpp"
#include "udot/solver.hpp"
#include "udot/types.hpp"

namespace udot {

/// Weighted point clouds and the surplus matrix between them.
struct DiscreteProblem {
  std::vector<Vec2> x_points;
  std::vector<double> a;
  std::vector<double> y_points;
  std::vector<double> b;
  std::vector<double> surplus;  // row-major, x_points.size() x y_points.size()

  std::size_t rows() const { return a.size(); }
  std::size_t cols() const { return b.size(); }
  double S(std::size_t i, std::size_t j) const { return surplus[i * cols() + j]; }
};

inline constexpr std::size_t kMaxSourceAtoms = 10000;
inline constexpr std::size_t kMaxTargetAtoms = 256;

/// Instance from weights and a surplus matrix alone (points left at zero).
/// Throws InvalidArgument on negative weights or a size mismatch.
DiscreteProblem make_discrete_problem(std::vector<double> a, std::vector<double> b,
                                      std::vector<double> surplus);

/// Cell centres of an nx x nx grid on the bounding box that lie in X, weighted
/// by f times the part of the cell inside X; ny target midpoints weighted by g.
/// Throws EmptyDiscretization, InstanceTooLarge.
DiscreteProblem discretize(const TransportProblem& problem, int nx, int ny);

struct CouplingEntry {
  std::size_t i;
  std::size_t j;
  double mass;
};

struct CouplingSolution {
  std::vector<CouplingEntry> coupling;
  double value = 0.0;       // sum pi_ij S_ij
  std::vector<double> u;    // u_i + v_j >= S_ij
  std::vector<double> v;    // normalized v[0] = 0
  double dual_value = 0.0;  // sum a u + sum b v
  long pivots = 0;
};

/// Exact optimal coupling and duals. Throws Unbalanced, InstanceTooLarge.
CouplingSolution solve_lp(const DiscreteProblem& dp);

struct GapReport {
  double gap = 0.0;
  double candidate_value = 0.0;  // sum a u + sum b v after repair
  double lp_value = 0.0;
  int repaired_rows = 0;
};

/// Duality gap of (u, v) after repairing rows that violate u_i + v_j >= S_ij - 1e-8.
GapReport duality_gap_report(const DiscreteProblem& dp, std::vector<double> u,
                             const std::vector<double>& v, double lp_value);
GapReport duality_gap_report(const DiscreteProblem& dp, std::vector<double> u,
                             const std::vector<double>& v);
double duality_gap(const DiscreteProblem& dp, const std::vector<double>& u,
                   const std::vector<double>& v);

Json to_json(const DiscreteProblem& dp);
DiscreteProblem discrete_problem_from_json(const Json& j);
Json to_json(const CouplingSolution& sol);
CouplingSolution coupling_solution_from_json(const Json& j);

}  // namespace udot
