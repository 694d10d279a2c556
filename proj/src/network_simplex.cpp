#include "udot/network_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "udot/error.hpp"

namespace udot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Solver {
 public:
  Solver(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c)
      : m_(a.size()), n_(b.size()), cost_(c) {
    const std::size_t nodes = m_ + n_ + 1;
    root_ = static_cast<int>(m_ + n_);
    real_arcs_ = m_ * n_;
    double max_cost = 0.0;
    for (double v : cost_) max_cost = std::max(max_cost, std::abs(v));
    art_cost_ = (max_cost + 1.0) * static_cast<double>(nodes);
    eps_ = 1e-12 * std::max(1.0, max_cost) * 16.0;

    // Arcs real_arcs_ + u: the artificial arc between node u and the root.
    flow_.assign(real_arcs_ + m_ + n_, 0.0);
    parent_.assign(nodes, -1);
    pred_.assign(nodes, -1);
    up_.assign(nodes, 0);
    depth_.assign(nodes, 0);
    pi_.assign(nodes, 0.0);
    children_.assign(nodes, {});
    for (std::size_t u = 0; u < m_ + n_; ++u) {
      const double supply = u < m_ ? a[u] : -b[u - m_];
      parent_[u] = root_;
      pred_[u] = static_cast<int>(real_arcs_ + u);
      depth_[u] = 1;
      children_[root_].push_back(static_cast<int>(u));
      if (supply >= 0.0) {
        up_[u] = 1;  // u -> root
        flow_[real_arcs_ + u] = supply;
        pi_[u] = -art_cost_;
      } else {
        up_[u] = 0;  // root -> u
        flow_[real_arcs_ + u] = -supply;
        pi_[u] = art_cost_;
      }
    }
  }

  TransportationSimplex::Result run() {
    const std::size_t block = std::max<std::size_t>(
        10, static_cast<std::size_t>(std::sqrt(static_cast<double>(real_arcs_))));
    std::size_t next = 0;
    long pivots = 0;
    const long max_pivots = 50L * static_cast<long>(real_arcs_ + m_ + n_) + 1000;
    for (;;) {
      const int entering = find_entering(block, next);
      if (entering < 0) break;
      pivot(entering);
      if (++pivots > max_pivots) {
        throw Error(ErrorCode::InvalidArgument, "network simplex exceeded its pivot budget");
      }
    }
    TransportationSimplex::Result r;
    r.pivots = pivots;
    for (std::size_t e = 0; e < real_arcs_; ++e) {
      if (flow_[e] > 0.0) {
        r.flows.push_back({e / n_, e % n_, flow_[e]});
        r.cost += flow_[e] * cost_[e];
      }
    }
    r.row_potential.assign(pi_.begin(), pi_.begin() + static_cast<long>(m_));
    r.col_potential.assign(pi_.begin() + static_cast<long>(m_),
                           pi_.begin() + static_cast<long>(m_ + n_));
    return r;
  }

 private:
  int source(std::size_t e) const {
    if (e < real_arcs_) return static_cast<int>(e / n_);
    const int u = static_cast<int>(e - real_arcs_);
    return up_artificial(u) ? u : root_;
  }
  int target(std::size_t e) const {
    if (e < real_arcs_) return static_cast<int>(m_ + e % n_);
    const int u = static_cast<int>(e - real_arcs_);
    return up_artificial(u) ? root_ : u;
  }
  // Artificial arcs keep the orientation they were created with.
  bool up_artificial(int u) const { return art_up_.empty() ? true : art_up_[u]; }

  double arc_cost(std::size_t e) const { return e < real_arcs_ ? cost_[e] : art_cost_; }

  double reduced_cost(std::size_t e) const {
    return arc_cost(e) + pi_[source(e)] - pi_[target(e)];
  }

  int find_entering(std::size_t block, std::size_t& next) const {
    double best = -eps_;
    int best_arc = -1;
    std::size_t scanned = 0, in_block = 0;
    std::size_t e = next;
    while (scanned < real_arcs_) {
      const double rc = reduced_cost(e);
      if (rc < best) {
        best = rc;
        best_arc = static_cast<int>(e);
      }
      ++scanned;
      e = e + 1 == real_arcs_ ? 0 : e + 1;
      if (++in_block == block) {
        if (best_arc >= 0) break;
        in_block = 0;
      }
    }
    next = e;
    return best_arc;
  }

  void pivot(int entering) {
    const int first = source(entering), second = target(entering);
    // Join node.
    int u = first, v = second;
    while (u != v) {
      if (depth_[u] > depth_[v]) u = parent_[u];
      else if (depth_[v] > depth_[u]) v = parent_[v];
      else {
        u = parent_[u];
        v = parent_[v];
      }
    }
    const int join = u;

    // Leaving arc by the strongly feasible rule.
    double delta = kInf;
    int u_out = -1;
    int side = 0;
    for (int w = first; w != join; w = parent_[w]) {
      const double d = up_[w] ? flow_[pred_[w]] : kInf;
      if (d < delta) {
        delta = d;
        u_out = w;
        side = 1;
      }
    }
    for (int w = second; w != join; w = parent_[w]) {
      const double d = up_[w] ? kInf : flow_[pred_[w]];
      if (d <= delta) {
        delta = d;
        u_out = w;
        side = 2;
      }
    }
    if (u_out < 0 || delta == kInf) {
      throw Error(ErrorCode::InvalidArgument, "transportation problem is unbounded");
    }

    // Push delta around the cycle.
    if (delta > 0.0) {
      for (int w = first; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? -delta : delta;
      for (int w = second; w != join; w = parent_[w]) flow_[pred_[w]] += up_[w] ? delta : -delta;
    }
    flow_[entering] = delta;
    flow_[pred_[u_out]] = 0.0;

    // Re-hang the subtree below u_out from the entering arc.
    const int u_in = side == 1 ? first : second;
    const int v_in = side == 1 ? second : first;
    detach(u_out);
    std::vector<int> path;
    for (int w = u_in; w != u_out; w = parent_[w]) path.push_back(w);
    path.push_back(u_out);
    // Reverse parent links along path (u_in ... u_out).
    for (std::size_t i = path.size() - 1; i > 0; --i) {
      const int child = path[i - 1], node = path[i];
      // node was parent of child; make child the parent of node.
      remove_child(node, child);
      parent_[node] = child;
      pred_[node] = pred_[child];
      up_[node] = !up_[child];
      children_[child].push_back(node);
    }
    parent_[u_in] = v_in;
    pred_[u_in] = entering;
    up_[u_in] = u_in == first ? 1 : 0;
    children_[v_in].push_back(u_in);
    refresh(u_in);
  }

  void detach(int w) {
    remove_child(parent_[w], w);
  }

  void remove_child(int p, int c) {
    auto& ch = children_[p];
    auto it = std::find(ch.begin(), ch.end(), c);
    if (it != ch.end()) {
      *it = ch.back();
      ch.pop_back();
    }
  }

  // Potentials and depths below (and including) w from its parent.
  void refresh(int w) {
    stack_.clear();
    stack_.push_back(w);
    while (!stack_.empty()) {
      const int x = stack_.back();
      stack_.pop_back();
      const int p = parent_[x];
      const double c = arc_cost(static_cast<std::size_t>(pred_[x]));
      pi_[x] = up_[x] ? pi_[p] - c : pi_[p] + c;
      depth_[x] = depth_[p] + 1;
      for (int ch : children_[x]) stack_.push_back(ch);
    }
  }

  std::size_t m_, n_;
  const std::vector<double>& cost_;
  int root_ = 0;
  std::size_t real_arcs_ = 0;
  double art_cost_ = 0.0;
  double eps_ = 0.0;
  std::vector<double> flow_;
  std::vector<int> parent_, pred_;
  std::vector<char> up_;
  std::vector<char> art_up_;
  std::vector<int> depth_;
  std::vector<double> pi_;
  std::vector<std::vector<int>> children_;
  std::vector<int> stack_;

 public:
  void freeze_artificial_orientation() { art_up_.assign(up_.begin(), up_.begin() + static_cast<long>(m_ + n_)); }
};

}  // namespace

TransportationSimplex::Result TransportationSimplex::solve(const std::vector<double>& a,
                                                           const std::vector<double>& b,
                                                           const std::vector<double>& cost) const {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "empty marginal");
  if (cost.size() != a.size() * b.size()) {
    throw Error(ErrorCode::InvalidArgument, "cost matrix has the wrong size");
  }
  Solver s(a, b, cost);
  s.freeze_artificial_orientation();
  return s.run();
}

}  // namespace udot
