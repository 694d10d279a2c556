#include "udot/kernels.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <stdexcept>

namespace udot::kernels {

Lattice make_lattice(const BBox& box, int cells) {
  if (cells < 1) throw std::invalid_argument("lattice needs at least one cell");
  // Unequal margins keep boundaries and lines through the box centre off grid lines.
  const double extent = std::max(box.width(), box.height());
  const double before = 0.0137 * extent, after = 0.0291 * extent;
  Lattice lat;
  lat.origin = {box.lo.x1 - before, box.lo.x2 - before};
  lat.hx = (box.width() + before + after) / cells;
  lat.hy = (box.height() + before + after) / cells;
  lat.cells = cells;
  return lat;
}

std::vector<double> sample_lattice_serial(const Lattice& lat, const ScalarField& field) {
  std::vector<double> out(lat.node_count());
  for (int j = 0; j < lat.side(); ++j)
    for (int i = 0; i < lat.side(); ++i) out[lat.index(i, j)] = field(lat.node(i, j));
  return out;
}

std::vector<double> sample_lattice(const Lattice& lat, const ScalarField& field) {
  std::vector<double> out(lat.node_count());
  const int side = lat.side();
#pragma omp parallel for schedule(static)
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i) out[lat.index(i, j)] = field(lat.node(i, j));
  return out;
}

namespace {

struct Vertex {
  Vec2 p;
  std::array<double, kMaxConstraints> v{};
};

using Polygon = std::vector<Vertex>;

double polygon_area_centroid(const Polygon& poly, Vec2& centroid) {
  double a2 = 0.0;
  Vec2 c{};
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Vec2 p = poly[k].p;
    const Vec2 q = poly[(k + 1) % poly.size()].p;
    const double w = cross(p, q);
    a2 += w;
    c += w * (p + q);
  }
  if (a2 == 0.0) {
    centroid = poly.empty() ? Vec2{} : poly.front().p;
    return 0.0;
  }
  centroid = (1.0 / (3.0 * a2)) * c;
  return 0.5 * std::abs(a2);
}

// Sutherland-Hodgman against {v[c] <= 0} with linear interpolation.
Polygon clip(const Polygon& in, int c) {
  Polygon out;
  out.reserve(in.size() + 2);
  for (std::size_t k = 0; k < in.size(); ++k) {
    const Vertex& a = in[k];
    const Vertex& b = in[(k + 1) % in.size()];
    const bool a_in = a.v[c] <= 0.0;
    const bool b_in = b.v[c] <= 0.0;
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      const double t = a.v[c] / (a.v[c] - b.v[c]);
      Vertex m;
      m.p = a.p + t * (b.p - a.p);
      for (int d = 0; d < kMaxConstraints; ++d) m.v[d] = a.v[d] + t * (b.v[d] - a.v[d]);
      m.v[c] = 0.0;
      out.push_back(m);
    }
  }
  return out;
}

class TriangleIntegrator {
 public:
  TriangleIntegrator(std::span<const Constraint> cons, const ScalarField& weight, int depth)
      : cons_(cons), weight_(weight), depth_(depth) {}

  double operator()(const Vertex& a, const Vertex& b, const Vertex& c, int level) const {
    bool all_inside = true;
    for (std::size_t k = 0; k < cons_.size(); ++k) {
      const bool out_a = a.v[k] > 0.0, out_b = b.v[k] > 0.0, out_c = c.v[k] > 0.0;
      if (out_a && out_b && out_c) return 0.0;
      if (out_a || out_b || out_c) all_inside = false;
    }
    if (all_inside) {
      const double area = 0.5 * std::abs(cross(b.p - a.p, c.p - a.p));
      return area * w((1.0 / 3.0) * (a.p + b.p + c.p));
    }
    if (level < depth_) {
      const Vertex ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
      return (*this)(a, ab, ca, level + 1) + (*this)(ab, b, bc, level + 1) +
             (*this)(ca, bc, c, level + 1) + (*this)(ab, bc, ca, level + 1);
    }
    Polygon poly{a, b, c};
    for (std::size_t k = 0; k < cons_.size() && !poly.empty(); ++k) poly = clip(poly, static_cast<int>(k));
    if (poly.size() < 3) return 0.0;
    Vec2 centroid;
    const double area = polygon_area_centroid(poly, centroid);
    return area * w(centroid);
  }

 private:
  double w(Vec2 x) const { return weight_ ? weight_(x) : 1.0; }

  Vertex mid(const Vertex& a, const Vertex& b) const {
    Vertex m;
    m.p = 0.5 * (a.p + b.p);
    for (std::size_t k = 0; k < cons_.size(); ++k) m.v[k] = cons_[k].exact(m.p);
    return m;
  }

  std::span<const Constraint> cons_;
  const ScalarField& weight_;
  int depth_;
};

double row_integral(const Lattice& lat, std::span<const Constraint> cons, const TriangleIntegrator& tri,
                    int j) {
  double row = 0.0;
  auto vertex = [&](int i, int jj) {
    Vertex v;
    v.p = lat.node(i, jj);
    for (std::size_t k = 0; k < cons.size(); ++k) v.v[k] = cons[k].node_values[lat.index(i, jj)];
    return v;
  };
  for (int i = 0; i < lat.cells; ++i) {
    const Vertex bl = vertex(i, j), br = vertex(i + 1, j), tr = vertex(i + 1, j + 1),
                 tl = vertex(i, j + 1);
    row += tri(bl, br, tr, 0) + tri(bl, tr, tl, 0);
  }
  return row;
}

void check_constraints(const Lattice& lat, std::span<const Constraint> cons) {
  if (cons.size() > static_cast<std::size_t>(kMaxConstraints))
    throw std::invalid_argument("too many constraints");
  for (const auto& c : cons)
    if (c.node_values.size() != lat.node_count())
      throw std::invalid_argument("constraint samples do not match the lattice");
}

}  // namespace

double clipped_integral_serial(const Lattice& lat, std::span<const Constraint> cons,
                               const ScalarField& weight, int refine_depth) {
  check_constraints(lat, cons);
  const TriangleIntegrator tri(cons, weight, refine_depth);
  std::vector<double> rows(lat.cells);
  for (int j = 0; j < lat.cells; ++j) rows[j] = row_integral(lat, cons, tri, j);
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

double clipped_integral(const Lattice& lat, std::span<const Constraint> cons,
                        const ScalarField& weight, int refine_depth) {
  check_constraints(lat, cons);
  const TriangleIntegrator tri(cons, weight, refine_depth);
  std::vector<double> rows(lat.cells);
  const int n = lat.cells;
#pragma omp parallel for schedule(dynamic, 4)
  for (int j = 0; j < n; ++j) rows[j] = row_integral(lat, cons, tri, j);
  double total = 0.0;
  for (double r : rows) total += r;
  return total;
}

void serial_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const long long count = static_cast<long long>(n);
  // Exceptions cannot cross the parallel region; keep the one from the
  // lowest index so the reported failure does not depend on scheduling.
  std::exception_ptr first_error;
  long long first_index = count;
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(udot_parallel_for_error)
      {
        if (i < first_index) {
          first_index = i;
          first_error = std::current_exception();
        }
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace udot::kernels
