#include "udot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "udot/error.hpp"
#include "udot/io.hpp"
#include "udot/kernels.hpp"

namespace udot {

double LevelSetMesh::total_length() const {
  double L = 0.0;
  for (const auto& s : segments) L += s.length;
  return L;
}

namespace {

using kernels::Lattice;

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::string where(double y, double p, std::optional<double> q, Vec2 x) {
  std::ostringstream os;
  os.precision(17);
  os << "(y,p";
  if (q) os << ",q";
  os << ")=(" << y << "," << p;
  if (q) os << "," << *q;
  os << ") x=(" << x.x1 << "," << x.x2 << ")";
  return os.str();
}

// Fills lengths, quadrature data and component labels from nodes + (a,b).
void finalize(LevelSetMesh& mesh, const SurplusModel& model) {
  std::vector<MeshSegment> kept;
  kept.reserve(mesh.segments.size());
  for (auto seg : mesh.segments) {
    const Vec2 A = mesh.nodes[seg.a], B = mesh.nodes[seg.b];
    seg.length = norm(B - A);
    if (!(seg.length > 0.0)) continue;
    seg.midpoint = 0.5 * (A + B);
    seg.weight = seg.length;
    const Vec2 g = model.grad_x_dy(seg.midpoint, mesh.y);
    const double gn = norm(g);
    seg.normal = gn > 0.0 ? (1.0 / gn) * g : Vec2{};
    seg.inv_speed = gn > 0.0 ? 1.0 / gn : 0.0;
    kept.push_back(seg);
  }
  mesh.segments = std::move(kept);

  // Drop nodes no segment or endpoint references.
  std::vector<int> remap(mesh.nodes.size(), -1);
  std::vector<Vec2> nodes;
  auto use = [&](int n) {
    if (remap[n] < 0) {
      remap[n] = static_cast<int>(nodes.size());
      nodes.push_back(mesh.nodes[n]);
    }
    return remap[n];
  };
  for (auto& s : mesh.segments) {
    s.a = use(s.a);
    s.b = use(s.b);
  }
  for (auto& e : mesh.boundary_hits) e.node = use(e.node);
  for (auto& e : mesh.cut_points) e.node = use(e.node);
  mesh.nodes = std::move(nodes);

  UnionFind uf(mesh.nodes.size());
  for (const auto& s : mesh.segments) uf.unite(s.a, s.b);
  std::map<int, int> label;
  for (auto& s : mesh.segments) {
    const int root = uf.find(s.a);
    auto [it, inserted] = label.emplace(root, static_cast<int>(label.size()));
    s.component = it->second;
  }
  mesh.components = static_cast<int>(label.size());
}

class Tracer {
 public:
  Tracer(const SurplusModel& model, const Region& region, double y, double p, int cells,
         const TraceOptions& opts)
      : model_(model), region_(region), y_(y), p_(p), opts_(opts),
        lat_(kernels::make_lattice(region.bbox(), cells)) {}

  LevelSetMesh run() {
    values_ = kernels::sample_lattice(lat_, [&](Vec2 x) { return model_.d_y(x, y_) - p_; });
    edge_node_.assign(2 * lat_.node_count(), -1);
    march();
    LevelSetMesh mesh;
    mesh.y = y_;
    mesh.p = p_;
    clip_to_region(mesh);
    finalize(mesh, model_);
    check_degeneracy(mesh);
    return mesh;
  }

 private:
  bool inside(std::size_t idx) const { return values_[idx] < 0.0; }

  Vec2 polish(Vec2 x) const {
    const double r = model_.d_y(x, y_) - p_;
    const Vec2 g = model_.grad_x_dy(x, y_);
    const double gg = dot(g, g);
    if (gg <= 0.0) return x;
    return x - (r / gg) * g;
  }

  int edge_crossing(int i0, int j0, int i1, int j1, bool horizontal) {
    const std::size_t a = lat_.index(i0, j0), b = lat_.index(i1, j1);
    const std::size_t id = 2 * a + (horizontal ? 0 : 1);
    if (edge_node_[id] >= 0) return edge_node_[id];
    const double va = values_[a], vb = values_[b];
    // A zero sample is a crossing at the lattice vertex, shared by every edge there.
    if (va == 0.0 || vb == 0.0) {
      const std::size_t v = va == 0.0 ? a : b;
      auto [it, inserted] = vertex_node_.emplace(v, static_cast<int>(raw_nodes_.size()));
      if (inserted) raw_nodes_.push_back(va == 0.0 ? lat_.node(i0, j0) : lat_.node(i1, j1));
      return edge_node_[id] = it->second;
    }
    const double t = va / (va - vb);
    const Vec2 A = lat_.node(i0, j0), B = lat_.node(i1, j1);
    const Vec2 x = polish(A + t * (B - A));
    edge_node_[id] = static_cast<int>(raw_nodes_.size());
    raw_nodes_.push_back(x);
    return edge_node_[id];
  }

  void march() {
    const int n = lat_.cells;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const bool bl = inside(lat_.index(i, j)), br = inside(lat_.index(i + 1, j));
        const bool tr = inside(lat_.index(i + 1, j + 1)), tl = inside(lat_.index(i, j + 1));
        if (bl == br && br == tr && tr == tl) continue;
        auto bottom = [&] { return edge_crossing(i, j, i + 1, j, true); };
        auto top = [&] { return edge_crossing(i, j + 1, i + 1, j + 1, true); };
        auto left = [&] { return edge_crossing(i, j, i, j + 1, false); };
        auto right = [&] { return edge_crossing(i + 1, j, i + 1, j + 1, false); };
        if (bl == tr && br == tl) {
          // Saddle: asymptotic decider on the bilinear interpolant.
          const double vbl = values_[lat_.index(i, j)], vbr = values_[lat_.index(i + 1, j)];
          const double vtr = values_[lat_.index(i + 1, j + 1)], vtl = values_[lat_.index(i, j + 1)];
          const double den = vbl + vtr - vbr - vtl;
          const double centre = den != 0.0 ? (vbl * vtr - vbr * vtl) / den
                                           : 0.25 * (vbl + vbr + vtr + vtl);
          if ((centre < 0.0) == bl) {
            raw_segments_.push_back({bottom(), right()});
            raw_segments_.push_back({left(), top()});
          } else {
            raw_segments_.push_back({left(), bottom()});
            raw_segments_.push_back({right(), top()});
          }
          continue;
        }
        std::vector<int> hits;
        if (bl != br) hits.push_back(bottom());
        if (br != tr) hits.push_back(right());
        if (tl != tr) hits.push_back(top());
        if (bl != tl) hits.push_back(left());
        raw_segments_.push_back({hits[0], hits[1]});
      }
    }
  }

  // Point on the region boundary between an inside and an outside point.
  Vec2 boundary_point(Vec2 in, Vec2 out) const {
    double lo = 0.0, hi = 1.0;
    while (hi - lo > opts_.bisection_tol) {
      const double mid = 0.5 * (lo + hi);
      if (region_.implicit(in + mid * (out - in)) <= 0.0) lo = mid;
      else hi = mid;
    }
    const Vec2 x0 = in + (0.5 * (lo + hi)) * (out - in);
    // Joint Newton on s_y = p and implicit = 0; kept only if it stays close.
    Vec2 x = x0;
    const double limit = norm(out - in);
    for (int it = 0; it < 8; ++it) {
      const double r1 = model_.d_y(x, y_) - p_;
      const double r2 = region_.implicit(x);
      const Vec2 g1 = model_.grad_x_dy(x, y_);
      const Vec2 g2 = region_.gradient(x);
      const double det = cross(g1, g2);
      if (std::abs(det) < 1e-12 * norm(g1) * norm(g2) || !std::isfinite(det)) return x0;
      // Solve [g1; g2] dx = -[r1; r2].
      const Vec2 dx{(-r1 * g2.x2 + r2 * g1.x2) / det, (-r2 * g1.x1 + r1 * g2.x1) / det};
      x += dx;
      if (norm(x - x0) > limit) return x0;
      if (norm(dx) < 1e-15 * (1.0 + norm(x))) break;
    }
    if (std::abs(region_.implicit(x)) > std::abs(region_.implicit(x0)) + 1e-14) return x0;
    return x;
  }

  void clip_to_region(LevelSetMesh& mesh) {
    mesh.nodes = raw_nodes_;
    std::vector<double> phi(raw_nodes_.size());
    for (std::size_t k = 0; k < raw_nodes_.size(); ++k) phi[k] = region_.implicit(raw_nodes_[k]);
    auto is_in = [&](int n) { return phi[n] <= opts_.edge_tol; };
    auto add_hit = [&](Vec2 x) {
      const int id = static_cast<int>(mesh.nodes.size());
      mesh.nodes.push_back(x);
      mesh.boundary_hits.push_back({x, id});
      return id;
    };
    for (const auto& [a, b] : raw_segments_) {
      const bool ain = is_in(a), bin = is_in(b);
      MeshSegment seg;
      if (ain && bin) {
        seg.a = a;
        seg.b = b;
        mesh.segments.push_back(seg);
      } else if (ain != bin) {
        const int in = ain ? a : b, out = ain ? b : a;
        seg.a = in;
        seg.b = add_hit(boundary_point(mesh.nodes[in], mesh.nodes[out]));
        mesh.segments.push_back(seg);
      } else {
        // Both ends outside: the segment may still cross a thin part of X.
        const Vec2 A = mesh.nodes[a], B = mesh.nodes[b];
        const Vec2 M = 0.5 * (A + B);
        if (region_.implicit(M) <= opts_.edge_tol) {
          seg.a = add_hit(boundary_point(M, A));
          seg.b = add_hit(boundary_point(M, B));
          mesh.segments.push_back(seg);
        }
      }
    }
  }

  void check_degeneracy(LevelSetMesh& mesh) const {
    for (const auto& s : mesh.segments) {
      if (norm(model_.grad_x_dy(s.midpoint, y_)) < opts_.degeneracy_floor) {
        throw Error(ErrorCode::DegenerateCell,
                    "|D_x s_y| below floor in an active cell at " + where(y_, p_, {}, s.midpoint));
      }
    }
    for (const auto& h : mesh.boundary_hits) {
      const Vec2 nw = normalized(model_.grad_x_dy(h.x, y_));
      const Vec2 nx = region_.boundary_normal(h.x);
      if (std::abs(dot(nw, nx)) > 1.0 - opts_.tangency_tol) {
        mesh.warnings.push_back({"transversality", h.x,
                                 "level curve tangent to the boundary at " + where(y_, p_, {}, h.x)});
      }
    }
  }

  const SurplusModel& model_;
  const Region& region_;
  double y_, p_;
  TraceOptions opts_;
  Lattice lat_;
  std::vector<double> values_;
  std::vector<int> edge_node_;
  std::map<std::size_t, int> vertex_node_;
  std::vector<Vec2> raw_nodes_;
  std::vector<std::pair<int, int>> raw_segments_;
};

}  // namespace

LevelSetMesh trace_level_set(const SurplusModel& model, const Region& region, double y, double p,
                             int cells, const TraceOptions& opts) {
  if (cells < 8) throw Error(ErrorCode::InvalidArgument, "trace_level_set needs cells >= 8");
  return Tracer(model, region, y, p, cells, opts).run();
}

LevelSetMesh restrict_sublevel(const LevelSetMesh& mesh, const SurplusModel& model, double q) {
  LevelSetMesh out;
  out.y = mesh.y;
  out.p = mesh.p;
  out.q = q;
  out.warnings = mesh.warnings;
  out.nodes = mesh.nodes;
  std::vector<double> phi(mesh.nodes.size());
  for (std::size_t k = 0; k < mesh.nodes.size(); ++k) phi[k] = model.d_yy(mesh.nodes[k], mesh.y) - q;

  for (const auto& s : mesh.segments) {
    const bool ain = phi[s.a] <= 0.0, bin = phi[s.b] <= 0.0;
    if (ain && bin) {
      out.segments.push_back(s);
      continue;
    }
    if (!ain && !bin) continue;
    const Vec2 A = mesh.nodes[s.a], B = mesh.nodes[s.b];
    double t = phi[s.a] / (phi[s.a] - phi[s.b]);
    const double slope = dot(model.grad_x_dyy(A + t * (B - A), mesh.y), B - A);
    if (slope != 0.0) {
      const double r = model.d_yy(A + t * (B - A), mesh.y) - q;
      t = std::clamp(t - r / slope, 0.0, 1.0);
    }
    const Vec2 cut = A + t * (B - A);
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(cut);
    out.cut_points.push_back({cut, id});
    MeshSegment seg = s;
    seg.a = ain ? s.a : id;
    seg.b = ain ? id : s.b;
    out.segments.push_back(seg);
  }
  for (const auto& h : mesh.boundary_hits)
    if (phi[h.node] <= 0.0) out.boundary_hits.push_back(h);
  finalize(out, model);
  for (const auto& c : out.cut_points) {
    const Vec2 nw = normalized(model.grad_x_dy(c.x, out.y));
    const Vec2 nz = normalized(model.grad_x_dyy(c.x, out.y));
    if (std::abs(dot(nw, nz)) > 1.0 - 1e-6) {
      out.warnings.push_back({"transversality", c.x,
                              "sublevel cut tangent to the level curve at " +
                                  where(out.y, out.p, out.q, c.x)});
    }
  }
  return out;
}

double integrate_over_mesh(const LevelSetMesh& mesh, const std::function<double(Vec2)>& integrand) {
  double sum = 0.0;
  for (const auto& s : mesh.segments) sum += s.weight * integrand(s.midpoint);
  return sum;
}

int count_components(const LevelSetMesh& mesh) {
  UnionFind uf(mesh.nodes.size());
  for (const auto& s : mesh.segments) uf.unite(s.a, s.b);
  std::vector<char> seen(mesh.nodes.size(), 0);
  int count = 0;
  for (const auto& s : mesh.segments) {
    const int r = uf.find(s.a);
    if (!seen[r]) {
      seen[r] = 1;
      ++count;
    }
  }
  return count;
}

namespace {

double clipped_mass(const Region& region, const SourceDensity& f, int cells,
                    std::vector<kernels::ScalarField> extra) {
  const Lattice lat = kernels::make_lattice(region.bbox(), cells);
  std::vector<kernels::ScalarField> fields(region.pieces().begin(), region.pieces().end());
  for (auto& e : extra) fields.push_back(std::move(e));
  std::vector<std::vector<double>> values;
  values.reserve(fields.size());
  std::vector<kernels::Constraint> cons;
  for (const auto& field : fields) {
    values.push_back(kernels::sample_lattice(lat, field));
    cons.push_back({values.back(), field});
  }
  kernels::ScalarField weight;
  if (f.value) weight = [&](Vec2 x) { return f(x); };
  return kernels::clipped_integral(lat, cons, weight);
}

}  // namespace

double sublevel_mass(const SurplusModel& model, const Region& region, const SourceDensity& f,
                     double y, double p, std::optional<double> q, int cells) {
  if (cells < 16) throw Error(ErrorCode::InvalidArgument, "sublevel_area needs cells >= 16");
  std::vector<kernels::ScalarField> extra{[&model, y, p](Vec2 x) { return model.d_y(x, y) - p; }};
  if (q) extra.push_back([&model, y, qv = *q](Vec2 x) { return model.d_yy(x, y) - qv; });
  return clipped_mass(region, f, cells, std::move(extra));
}

double sublevel_area(const SurplusModel& model, const Region& region, double y, double p,
                     std::optional<double> q, int cells) {
  return sublevel_mass(model, region, SourceDensity{}, y, p, q, cells);
}

double region_mass(const Region& region, const SourceDensity& f, int cells) {
  return clipped_mass(region, f, cells, {});
}

std::vector<std::vector<int>> polyline_chains(const LevelSetMesh& mesh) {
  const std::size_t n = mesh.nodes.size();
  std::vector<std::vector<int>> adj(n);  // segment indices per node
  for (std::size_t k = 0; k < mesh.segments.size(); ++k) {
    adj[mesh.segments[k].a].push_back(static_cast<int>(k));
    adj[mesh.segments[k].b].push_back(static_cast<int>(k));
  }
  std::vector<char> used(mesh.segments.size(), 0);
  std::vector<std::vector<int>> chains;
  auto walk = [&](int start) {
    std::vector<int> chain{start};
    int node = start;
    for (;;) {
      int next_seg = -1;
      for (int s : adj[node])
        if (!used[s]) {
          next_seg = s;
          break;
        }
      if (next_seg < 0) break;
      used[next_seg] = 1;
      const auto& seg = mesh.segments[next_seg];
      node = seg.a == node ? seg.b : seg.a;
      chain.push_back(node);
      if (adj[node].size() != 2) break;
    }
    return chain;
  };
  // Open chains start at nodes of degree != 2, closed loops anywhere.
  for (std::size_t v = 0; v < n; ++v)
    if (adj[v].size() != 2)
      while (std::any_of(adj[v].begin(), adj[v].end(), [&](int s) { return !used[s]; }))
        chains.push_back(walk(static_cast<int>(v)));
  for (std::size_t k = 0; k < mesh.segments.size(); ++k)
    if (!used[k]) chains.push_back(walk(mesh.segments[k].a));
  return chains;
}

void write_mesh_csv(std::ostream& os, const LevelSetMesh& mesh) {
  os << "component,x1,x2\n";
  std::vector<int> node_component(mesh.nodes.size(), 0);
  for (const auto& s : mesh.segments) node_component[s.a] = node_component[s.b] = s.component;
  for (const auto& chain : polyline_chains(mesh)) {
    for (int v : chain) {
      os << node_component[v] << ',' << format_real(mesh.nodes[v].x1) << ','
         << format_real(mesh.nodes[v].x2) << '\n';
    }
  }
}

}  // namespace udot
