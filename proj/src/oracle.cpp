#include "udot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "udot/error.hpp"
#include "udot/kernels.hpp"
#include "udot/network_simplex.hpp"

namespace udot {

namespace {

void check_size(std::size_t rows, std::size_t cols) {
  if (rows > kMaxSourceAtoms || cols > kMaxTargetAtoms) {
    throw Error(ErrorCode::InstanceTooLarge,
                "instance " + std::to_string(rows) + " x " + std::to_string(cols) +
                    " exceeds " + std::to_string(kMaxSourceAtoms) + " x " +
                    std::to_string(kMaxTargetAtoms) + " atoms");
  }
}

// Area of one grid cell inside the region, by clipping on a small sub-lattice.
double cell_area_inside(const Region& region, Vec2 lo, double hx, double hy) {
  constexpr int sub = 4;
  kernels::Lattice lat{lo, hx / sub, hy / sub, sub};
  std::vector<std::vector<double>> values;
  std::vector<kernels::Constraint> cons;
  values.reserve(region.pieces().size());
  for (const auto& piece : region.pieces()) {
    values.push_back(kernels::sample_lattice_serial(lat, piece));
    cons.push_back({values.back(), piece});
  }
  return kernels::clipped_integral_serial(lat, cons, {});
}

}  // namespace

DiscreteProblem make_discrete_problem(std::vector<double> a, std::vector<double> b,
                                      std::vector<double> surplus) {
  if (surplus.size() != a.size() * b.size()) {
    throw Error(ErrorCode::InvalidArgument, "surplus matrix has the wrong size");
  }
  for (double w : a)
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative source weight");
  for (double w : b)
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative target weight");
  DiscreteProblem dp;
  dp.x_points.assign(a.size(), Vec2{});
  dp.y_points.assign(b.size(), 0.0);
  dp.a = std::move(a);
  dp.b = std::move(b);
  dp.surplus = std::move(surplus);
  return dp;
}

DiscreteProblem discretize(const TransportProblem& problem, int nx, int ny) {
  if (nx < 1 || ny < 1) throw Error(ErrorCode::InvalidArgument, "nx and ny must be positive");
  const BBox& box = problem.region().bbox();
  const double hx = box.width() / nx, hy = box.height() / nx;
  DiscreteProblem dp;
  for (int r = 0; r < nx; ++r) {
    for (int c = 0; c < nx; ++c) {
      const Vec2 lo{box.lo.x1 + c * hx, box.lo.x2 + r * hy};
      const Vec2 centre{lo.x1 + 0.5 * hx, lo.x2 + 0.5 * hy};
      if (!problem.region().contains(centre)) continue;
      const double area = cell_area_inside(problem.region(), lo, hx, hy);
      dp.x_points.push_back(centre);
      dp.a.push_back(problem.f()(centre) * area);
    }
  }
  if (dp.x_points.empty()) {
    throw Error(ErrorCode::EmptyDiscretization,
                "no cell centre of the " + std::to_string(nx) + "x" + std::to_string(nx) +
                    " grid lies in the region");
  }
  check_size(dp.x_points.size(), static_cast<std::size_t>(ny));
  const TargetDomain& t = problem.target();
  const double hy_t = t.length() / ny;
  for (int j = 0; j < ny; ++j) {
    const double lo = t.lo + j * hy_t;
    dp.y_points.push_back(lo + 0.5 * hy_t);
    dp.b.push_back(integrate_target(problem.g(), lo, lo + hy_t, 64));
  }
  const double sa = std::accumulate(dp.a.begin(), dp.a.end(), 0.0);
  const double sb = std::accumulate(dp.b.begin(), dp.b.end(), 0.0);
  for (double& w : dp.a) w /= sa;
  for (double& w : dp.b) w /= sb;
  // Absorb rounding so the marginals balance exactly in floating point.
  const double drift = std::accumulate(dp.a.begin(), dp.a.end(), 0.0) -
                       std::accumulate(dp.b.begin(), dp.b.end(), 0.0);
  *std::max_element(dp.b.begin(), dp.b.end()) += drift;

  dp.surplus.resize(dp.rows() * dp.cols());
  kernels::parallel_for(dp.rows(), [&](std::size_t i) {
    for (std::size_t j = 0; j < dp.cols(); ++j)
      dp.surplus[i * dp.cols() + j] = problem.model().value(dp.x_points[i], dp.y_points[j]);
  });
  return dp;
}

CouplingSolution solve_lp(const DiscreteProblem& dp) {
  check_size(dp.rows(), dp.cols());
  if (dp.rows() == 0 || dp.cols() == 0) {
    throw Error(ErrorCode::InvalidArgument, "empty discrete problem");
  }
  const double sa = std::accumulate(dp.a.begin(), dp.a.end(), 0.0);
  const double sb = std::accumulate(dp.b.begin(), dp.b.end(), 0.0);
  if (std::abs(sa - sb) > 1e-10) {
    throw Error(ErrorCode::Unbalanced, "sum a = " + format_real(sa) + " but sum b = " +
                                           format_real(sb));
  }
  // Tiny imbalance goes to the largest target atom so the network is exactly balanced.
  std::vector<double> b = dp.b;
  *std::max_element(b.begin(), b.end()) += sa - sb;

  std::vector<double> cost(dp.surplus.size());
  std::transform(dp.surplus.begin(), dp.surplus.end(), cost.begin(), [](double s) { return -s; });
  const auto r = TransportationSimplex().solve(dp.a, b, cost);

  CouplingSolution sol;
  sol.pivots = r.pivots;
  for (const auto& fl : r.flows) {
    sol.coupling.push_back({fl.i, fl.j, fl.amount});
    sol.value += fl.amount * dp.S(fl.i, fl.j);
  }
  const double shift = r.col_potential[0];
  sol.u.resize(dp.rows());
  sol.v.resize(dp.cols());
  for (std::size_t i = 0; i < dp.rows(); ++i) sol.u[i] = r.row_potential[i] - shift;
  for (std::size_t j = 0; j < dp.cols(); ++j) sol.v[j] = shift - r.col_potential[j];
  for (std::size_t i = 0; i < dp.rows(); ++i) sol.dual_value += dp.a[i] * sol.u[i];
  for (std::size_t j = 0; j < dp.cols(); ++j) sol.dual_value += dp.b[j] * sol.v[j];
  return sol;
}

GapReport duality_gap_report(const DiscreteProblem& dp, std::vector<double> u,
                             const std::vector<double>& v, double lp_value) {
  if (u.size() != dp.rows() || v.size() != dp.cols()) {
    throw Error(ErrorCode::InvalidArgument, "potential sizes do not match the problem");
  }
  GapReport rep;
  rep.lp_value = lp_value;
  for (std::size_t i = 0; i < dp.rows(); ++i) {
    double need = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < dp.cols(); ++j) need = std::max(need, dp.S(i, j) - v[j]);
    if (u[i] < need - 1e-8) {
      u[i] = need;
      ++rep.repaired_rows;
    }
  }
  for (std::size_t i = 0; i < dp.rows(); ++i) rep.candidate_value += dp.a[i] * u[i];
  for (std::size_t j = 0; j < dp.cols(); ++j) rep.candidate_value += dp.b[j] * v[j];
  rep.gap = rep.candidate_value - lp_value;
  return rep;
}

GapReport duality_gap_report(const DiscreteProblem& dp, std::vector<double> u,
                             const std::vector<double>& v) {
  return duality_gap_report(dp, std::move(u), v, solve_lp(dp).value);
}

double duality_gap(const DiscreteProblem& dp, const std::vector<double>& u,
                   const std::vector<double>& v) {
  return duality_gap_report(dp, u, v).gap;
}

Json to_json(const DiscreteProblem& dp) {
  Json xs = Json::array();
  for (const auto& x : dp.x_points) xs.push_back({x.x1, x.x2});
  return Json{{"x_points", xs},
              {"a", dp.a},
              {"y_points", dp.y_points},
              {"b", dp.b},
              {"surplus", dp.surplus},
              {"rows", dp.rows()},
              {"cols", dp.cols()}};
}

DiscreteProblem discrete_problem_from_json(const Json& j) {
  try {
    DiscreteProblem dp = make_discrete_problem(j.at("a").get<std::vector<double>>(),
                                               j.at("b").get<std::vector<double>>(),
                                               j.at("surplus").get<std::vector<double>>());
    if (j.contains("x_points")) {
      dp.x_points.clear();
      for (const auto& p : j.at("x_points")) dp.x_points.push_back({p.at(0), p.at(1)});
    }
    if (j.contains("y_points")) dp.y_points = j.at("y_points").get<std::vector<double>>();
    if (dp.x_points.size() != dp.rows() || dp.y_points.size() != dp.cols()) {
      throw Error(ErrorCode::Config, "point lists do not match the weights");
    }
    return dp;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad discrete problem JSON: ") + e.what());
  }
}

Json to_json(const CouplingSolution& sol) {
  Json coupling = Json::array();
  for (const auto& c : sol.coupling) coupling.push_back({c.i, c.j, c.mass});
  return Json{{"coupling", coupling},
              {"value", sol.value},
              {"dual_value", sol.dual_value},
              {"u", sol.u},
              {"v", sol.v},
              {"pivots", sol.pivots}};
}

CouplingSolution coupling_solution_from_json(const Json& j) {
  try {
    CouplingSolution sol;
    for (const auto& c : j.at("coupling"))
      sol.coupling.push_back({c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(),
                              c.at(2).get<double>()});
    sol.value = j.at("value");
    sol.dual_value = j.at("dual_value");
    sol.u = j.at("u").get<std::vector<double>>();
    sol.v = j.at("v").get<std::vector<double>>();
    sol.pivots = j.value("pivots", 0L);
    return sol;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("bad coupling JSON: ") + e.what());
  }
}

}  // namespace udot
