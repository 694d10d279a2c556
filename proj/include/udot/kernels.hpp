#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version and a serial
// reference with identical arithmetic; the serial one exists for tests and
// benchmarks. Reductions are ordered, so both return bitwise-equal results
// regardless of the thread count.

#include <functional>
#include <span>
#include <vector>

#include "udot/types.hpp"

namespace udot::kernels {

/// Uniform (cells x cells) grid of squares over a box.
struct Lattice {
  Vec2 origin;
  double hx = 0.0;
  double hy = 0.0;
  int cells = 0;

  int side() const { return cells + 1; }
  std::size_t node_count() const { return static_cast<std::size_t>(side()) * side(); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * side() + i; }
  Vec2 node(int i, int j) const { return {origin.x1 + i * hx, origin.x2 + j * hy}; }
};

/// Lattice over `box` grown by a small margin, so that region boundaries
/// and axis-aligned level lines do not sit on grid lines.
Lattice make_lattice(const BBox& box, int cells);

using ScalarField = std::function<double(Vec2)>;

/// Field values at every lattice node, row-major (index(i,j)).
std::vector<double> sample_lattice(const Lattice& lat, const ScalarField& field);
std::vector<double> sample_lattice_serial(const Lattice& lat, const ScalarField& field);

/// One inequality {field <= 0}, with the field's lattice samples.
struct Constraint {
  std::span<const double> node_values;
  ScalarField exact;
};

inline constexpr int kMaxConstraints = 8;

/// Integral of `weight` (1 if empty) over the set where every constraint is
/// <= 0. Each cell is split into two triangles; a triangle cut by some
/// constraint is subdivided `refine_depth` times with exact field values and
/// then clipped against the linear interpolants.
double clipped_integral(const Lattice& lat, std::span<const Constraint> constraints,
                        const ScalarField& weight, int refine_depth = 3);
double clipped_integral_serial(const Lattice& lat, std::span<const Constraint> constraints,
                               const ScalarField& weight, int refine_depth = 3);

/// out[i] = fn(i) for i in [0, n).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);
void serial_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace udot::kernels
