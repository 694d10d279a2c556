#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "udot/density.hpp"
#include "udot/region.hpp"
#include "udot/surplus.hpp"

namespace udot {

struct MeshSegment {
  int a = 0;
  int b = 0;
  double length = 0.0;
  Vec2 midpoint;     // quadrature point
  double weight = 0.0;  // = length
  Vec2 normal;       // D_x s_y / |D_x s_y| at the midpoint
  double inv_speed = 0.0;  // w = 1 / |D_x s_y| at the midpoint
  int component = 0;
};

/// A point where the curve ends: on the region boundary, or where the
/// sublevel restriction cut it (s_yy = q).
struct MeshEndpoint {
  Vec2 x;
  int node = 0;
};

struct MeshWarning {
  std::string kind;
  Vec2 x;
  std::string message;
};

/// Polyline discretization of X1(y,p) = {s_y(.,y) = p} in X, or of its
/// restriction X2(y,p,q) = X1 cap {s_yy <= q}.
struct LevelSetMesh {
  double y = 0.0;
  double p = 0.0;
  std::optional<double> q;
  std::vector<Vec2> nodes;
  std::vector<MeshSegment> segments;
  std::vector<MeshEndpoint> boundary_hits;
  std::vector<MeshEndpoint> cut_points;
  std::vector<MeshWarning> warnings;
  int components = 0;

  bool empty() const { return segments.empty(); }
  double total_length() const;
};

struct TraceOptions {
  double edge_tol = 1e-9;          // nodes with implicit <= edge_tol count as inside
  double degeneracy_floor = 1e-8;  // |D_x s_y| below this inside an active cell is an error
  double bisection_tol = 1e-10;    // parameter tolerance for boundary clipping
  double tangency_tol = 1e-6;      // |n_W . n_X| > 1 - tol raises a transversality warning
};

/// Marching squares on a cells x cells lattice over the region's box,
/// clipped to the region. Empty when p is not attained.
LevelSetMesh trace_level_set(const SurplusModel& model, const Region& region, double y, double p,
                             int cells, const TraceOptions& opts = {});

/// The part of `mesh` where s_yy <= q. Records the cut points.
LevelSetMesh restrict_sublevel(const LevelSetMesh& mesh, const SurplusModel& model, double q);

/// Midpoint rule: sum of weight * integrand(midpoint).
double integrate_over_mesh(const LevelSetMesh& mesh, const std::function<double(Vec2)>& integrand);

/// Connected components under shared nodes.
int count_components(const LevelSetMesh& mesh);

/// Area of {s_y <= p} cap {s_yy <= q, if given} cap X.
double sublevel_area(const SurplusModel& model, const Region& region, double y, double p,
                     std::optional<double> q, int cells);

/// Integral of f over the same set as sublevel_area.
double sublevel_mass(const SurplusModel& model, const Region& region, const SourceDensity& f,
                     double y, double p, std::optional<double> q, int cells);

/// Integral of f over the region.
double region_mass(const Region& region, const SourceDensity& f, int cells);

/// Node chains of the polyline, one per maximal unbranched path.
std::vector<std::vector<int>> polyline_chains(const LevelSetMesh& mesh);

/// CSV with header "component,x1,x2", nodes in chain order.
void write_mesh_csv(std::ostream& os, const LevelSetMesh& mesh);

}  // namespace udot
