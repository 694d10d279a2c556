#include "udot/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>

#include "udot/error.hpp"
#include "udot/geometry.hpp"
#include "udot/operators.hpp"
#include "udot/oracle.hpp"
#include "udot/presets.hpp"
#include "udot/solver.hpp"

namespace udot {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config.

void RunConfig::validate() const {
  auto positive = [](const char* name, long v) {
    if (v <= 0) throw Error(ErrorCode::Config, std::string(name) + " must be positive");
  };
  positive("cells", cells);
  positive("ode_steps", ode_steps);
  positive("nx", nx);
  positive("ny", ny);
  positive("samples", samples);
  positive("bins", bins);
  positive("jacobian_samples", jacobian_samples);
  positive("nonlocal_points", nonlocal_points);
  positive("levelset_count", levelset_count);
  if (cells < 16) throw Error(ErrorCode::Config, "cells must be at least 16");
  if (ode_steps < 4) throw Error(ErrorCode::Config, "ode_steps must be at least 4");
  if (bc != "default") parse_boundary_mode(bc);
  if (!std::isfinite(convexify_coefficient) || convexify_coefficient < 0.0)
    throw Error(ErrorCode::Config, "convexify_coefficient must be a finite number >= 0");
}

namespace {

template <class T>
void read_field(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Config, std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
  static const std::vector<std::string> known{
      "preset",  "cells", "ode_steps", "bc",   "initial_k",        "convexify_coefficient",
      "seed",    "out",   "nx",        "ny",   "samples",          "bins",
      "jacobian_samples", "nonlocal_points", "levelset_count", "solution", "thresholds"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorCode::Config, "unknown config field '" + key + "'");
  }
  RunConfig c;
  read_field(j, "preset", c.preset);
  read_field(j, "cells", c.cells);
  read_field(j, "ode_steps", c.ode_steps);
  read_field(j, "bc", c.bc);
  read_field(j, "initial_k", c.initial_k);
  read_field(j, "convexify_coefficient", c.convexify_coefficient);
  read_field(j, "seed", c.seed);
  std::string out = c.out.string();
  read_field(j, "out", out);
  c.out = out;
  read_field(j, "nx", c.nx);
  read_field(j, "ny", c.ny);
  read_field(j, "samples", c.samples);
  read_field(j, "bins", c.bins);
  read_field(j, "jacobian_samples", c.jacobian_samples);
  read_field(j, "nonlocal_points", c.nonlocal_points);
  read_field(j, "levelset_count", c.levelset_count);
  if (j.contains("solution")) {
    std::string s;
    read_field(j, "solution", s);
    c.solution = s;
  }
  if (j.contains("thresholds")) {
    const Json& t = j.at("thresholds");
    if (!t.is_object()) throw Error(ErrorCode::Config, "thresholds must be an object");
    for (const auto& [key, _] : t.items()) {
      if (key != "tv" && key != "duality_gap" && key != "nonlocal" && key != "jacobian" &&
          key != "mass")
        throw Error(ErrorCode::Config, "unknown threshold '" + key + "'");
    }
    read_field(t, "tv", c.thresholds.tv);
    read_field(t, "duality_gap", c.thresholds.duality_gap);
    read_field(t, "nonlocal", c.thresholds.nonlocal);
    read_field(t, "jacobian", c.thresholds.jacobian);
    read_field(t, "mass", c.thresholds.mass);
  }
  return c;
}

Json config_to_json(const RunConfig& c) {
  Json j{{"preset", c.preset},
         {"cells", c.cells},
         {"ode_steps", c.ode_steps},
         {"bc", c.bc},
         {"initial_k", c.initial_k},
         {"convexify_coefficient", c.convexify_coefficient},
         {"seed", c.seed},
         {"out", c.out.generic_string()},
         {"nx", c.nx},
         {"ny", c.ny},
         {"samples", c.samples},
         {"bins", c.bins},
         {"jacobian_samples", c.jacobian_samples},
         {"nonlocal_points", c.nonlocal_points},
         {"levelset_count", c.levelset_count},
         {"thresholds",
          {{"tv", c.thresholds.tv},
           {"duality_gap", c.thresholds.duality_gap},
           {"nonlocal", c.thresholds.nonlocal},
           {"jacobian", c.thresholds.jacobian},
           {"mass", c.thresholds.mass}}}};
  if (c.solution) j["solution"] = c.solution->generic_string();
  return j;
}

RunConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::Config, "config file " + path.string() + " not found");
  return config_from_json(read_json(path));
}

// ---------------------------------------------------------------------------
// Shared pieces.

namespace {

Json error_json(const Error& e) {
  return Json{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
}

Json point_json(Vec2 x) { return Json::array({x.x1, x.x2}); }

Json margin_json(const MarginReport& r) {
  Json j{{"min_value", r.min_value},
         {"argmin_x", point_json(r.argmin_x)},
         {"argmin_y", r.argmin_y},
         {"samples_used", r.samples_used}};
  if (r.argmin_y_bar) j["argmin_y_bar"] = *r.argmin_y_bar;
  return j;
}

// Structural checks of the surplus; failures become warnings.
Json margins_json(const TransportProblem& problem, std::uint64_t seed, Json& warnings) {
  MarginOptions opts;
  opts.seed = seed;
  Json out = Json::object();
  auto run = [&](const char* name, auto check) {
    try {
      Json m = margin_json(check(problem.model(), problem.region(), opts));
      m["ok"] = true;
      out[name] = m;
    } catch (const ZeroMarginError& e) {
      Json m = margin_json(e.report());
      m["ok"] = false;
      out[name] = m;
      warnings.push_back({{"kind", name},
                          {"message", e.what()},
                          {"x", point_json(e.report().argmin_x)},
                          {"y", e.report().argmin_y}});
    }
  };
  run("nondegeneracy", [](auto&... a) { return check_nondegeneracy(a...); });
  run("enhanced_twist", [](auto&... a) { return check_enhanced_twist(a...); });
  return out;
}

struct Setup {
  Preset preset;
  TransportProblem problem;
};

Setup make_setup(const RunConfig& c) {
  c.validate();
  Preset preset = make_preset(c.preset);
  try {
    TransportProblem problem =
        TransportProblem::from_preset(preset, c.cells, c.ode_steps, c.convexify_coefficient);
    return Setup{std::move(preset), std::move(problem)};
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, std::string("problem set-up failed: ") + e.what());
  }
}

BoundaryCondition boundary_from(const RunConfig& c, const TransportProblem& problem) {
  BoundaryCondition bc = default_boundary(problem);
  if (c.bc != "default") bc.mode = parse_boundary_mode(c.bc);
  bc.k0 = c.initial_k;
  return bc;
}

std::vector<std::size_t> spread_indices(std::size_t n, int count) {
  std::vector<std::size_t> idx;
  if (n == 0) return idx;
  const std::size_t m = std::min<std::size_t>(n, static_cast<std::size_t>(count));
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = m == 1 ? 0 : j * (n - 1) / (m - 1);
    if (idx.empty() || idx.back() != i) idx.push_back(i);
  }
  return idx;
}

void warn_mesh(const LevelSetMesh& mesh, Json& warnings) {
  for (const auto& w : mesh.warnings) {
    Json j{{"kind", w.kind}, {"message", w.message}, {"x", point_json(w.x)}, {"y", mesh.y},
           {"p", mesh.p}};
    if (mesh.q) j["q"] = *mesh.q;
    warnings.push_back(j);
  }
}

void write_levelsets(const fs::path& path, const TransportProblem& problem,
                     const PotentialSolution& sol, int count, Json& warnings) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Config, "cannot write " + path.string());
  os << "y,set,component,chain,x1,x2\n";
  for (std::size_t i : spread_indices(sol.y.size(), count)) {
    const double y = problem.target().wrap(sol.y[i]);
    const LevelSetMesh x1 =
        trace_level_set(problem.model(), problem.region(), y, sol.k[i], problem.cells());
    const LevelSetMesh x2 = restrict_sublevel(x1, problem.model(), sol.q_used[i]);
    warn_mesh(x2, warnings);
    int set = 1;
    for (const LevelSetMesh* mesh : {&x1, &x2}) {
      std::vector<int> comp(mesh->nodes.size(), 0);
      for (const auto& s : mesh->segments) comp[s.a] = comp[s.b] = s.component;
      int chain_id = 0;
      for (const auto& chain : polyline_chains(*mesh)) {
        for (int v : chain) {
          os << format_real(sol.y[i]) << ',' << set << ',' << comp[v] << ',' << chain_id << ','
             << format_real(mesh->nodes[v].x1) << ',' << format_real(mesh->nodes[v].x2) << '\n';
        }
        ++chain_id;
      }
      ++set;
    }
  }
}

Json exact_errors(const Preset& preset, const RunConfig& c, const PotentialSolution& sol) {
  if (!preset.exact || sol.y.empty()) return nullptr;
  const double cc = c.convexify_coefficient;
  auto k_exact = [&](double y) { return preset.exact->k(y) + cc * y; };
  auto v_exact = [&](double y) { return preset.exact->v(y) + 0.5 * cc * y * y; };
  double ek = 0.0, ev = 0.0;
  const double v0 = v_exact(sol.y.front());
  for (std::size_t i = 0; i < sol.y.size(); ++i) {
    ek = std::max(ek, std::abs(sol.k[i] - k_exact(sol.y[i])));
    ev = std::max(ev, std::abs(sol.v[i] - (v_exact(sol.y[i]) - v0)));
  }
  return Json{{"max_k_error", ek}, {"max_v_error", ev}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands.

int cmd_solve(const RunConfig& c) {
  Setup s = make_setup(c);
  const TransportProblem& problem = s.problem;
  const BoundaryCondition bc = boundary_from(c, problem);
  fs::create_directories(c.out);

  Json report{{"command", "solve"},
              {"config", config_to_json(c)},
              {"preset", c.preset},
              {"boundary_mode", to_string(bc.mode)},
              {"convexify_coefficient", c.convexify_coefficient}};
  Json warnings = Json::array();
  report["margins"] = margins_json(problem, c.seed, warnings);

  int code = kExitOk;
  PotentialSolution sol;
  try {
    sol = solve_ode(problem, bc);
    report["status"] = "ok";
  } catch (const SolverAbort& e) {
    sol = e.partial();
    report["status"] = "aborted";
    report["error"] = error_json(e);
    code = kExitSolver;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    report["status"] = "failed";
    report["error"] = error_json(e);
    code = kExitSolver;
  }

  if (!sol.y.empty()) {
    write_solution_csv(c.out / "solution.csv", sol);
    write_levelsets(c.out / "levelsets.csv", problem, sol, c.levelset_count, warnings);
  }
  report["solution"] = solution_diagnostics_json(sol);
  if (sol.diagnostics.count("mass_residual")) report["mass_residual"] = sol.diagnostics["mass_residual"];
  report["exact"] = exact_errors(s.preset, c, sol);
  report["warnings"] = warnings;
  write_json(c.out / "report.json", report);

  std::cout << "solve " << c.preset << ": " << report["status"].get<std::string>() << ", "
            << sol.y.size() << " grid points";
  if (report.contains("mass_residual")) std::cout << ", mass residual " << format_real(report["mass_residual"]);
  std::cout << '\n';
  if (report.contains("error")) std::cerr << report["error"]["message"].get<std::string>() << '\n';
  return code;
}

int cmd_diagnose(const RunConfig& c) {
  Setup s = make_setup(c);
  const TransportProblem& problem = s.problem;
  fs::create_directories(c.out);
  Json report{{"command", "diagnose"}, {"config", config_to_json(c)}, {"preset", c.preset}};
  Json warnings = Json::array();
  report["margins"] = margins_json(problem, c.seed, warnings);

  const TargetDomain& t = problem.target();
  const SurplusModel& model = problem.model();
  const int ny = c.levelset_count;
  const auto xs = region_samples(problem.region(), 2048, c.seed);
  Json lattice = Json::array();
  int x1_min = std::numeric_limits<int>::max(), x1_max = 0, x2_min = x1_min, x2_max = 0;
  for (int iy = 0; iy < ny; ++iy) {
    const double y = t.periodic ? t.lo + t.length() * iy / ny : t.lo + t.length() * (iy + 0.5) / ny;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Vec2 x : xs) {
      lo = std::min(lo, model.d_y(x, y));
      hi = std::max(hi, model.d_y(x, y));
    }
    for (double frac : {0.25, 0.5, 0.75}) {
      const double p = lo + frac * (hi - lo);
      try {
        const LevelSetMesh x1 = trace_level_set(model, problem.region(), y, p, c.cells);
        warn_mesh(x1, warnings);
        double qlo = std::numeric_limits<double>::infinity(), qhi = -qlo;
        for (const auto& sgm : x1.segments) {
          qlo = std::min(qlo, model.d_yy(sgm.midpoint, y));
          qhi = std::max(qhi, model.d_yy(sgm.midpoint, y));
        }
        if (x1.empty()) continue;
        for (double qf : {0.25, 0.5, 0.75}) {
          const double q = qhi > qlo ? qlo + qf * (qhi - qlo) : qlo + qf;
          const LevelSetMesh x2 = restrict_sublevel(x1, model, q);
          const int n1 = count_components(x1), n2 = count_components(x2);
          lattice.push_back({{"y", y}, {"p", p}, {"q", q}, {"x1_components", n1},
                             {"x2_components", n2}});
        }
      } catch (const Error& e) {
        warnings.push_back({{"kind", std::string(to_string(e.code()))},
                            {"message", e.what()},
                            {"y", y},
                            {"p", p}});
      }
    }
  }
  Json components{{"lattice", lattice}};
  if (s.preset.exact) {
    // Along the known solution line (y, k(y), k'(y)).
    const double cc = c.convexify_coefficient;
    auto k = [&](double y) { return s.preset.exact->k(y) + cc * y; };
    Json line = Json::array();
    for (int iy = 0; iy < ny; ++iy) {
      const double y = t.periodic ? t.lo + t.length() * iy / ny : t.lo + t.length() * (iy + 0.5) / ny;
      const double h = 1e-5 * t.length();
      const double q = (k(y + h) - k(y - h)) / (2 * h);
      const LevelSetMesh x1 = trace_level_set(model, problem.region(), y, k(y), c.cells);
      const LevelSetMesh x2 = restrict_sublevel(x1, model, q);
      const int n1 = count_components(x1), n2 = count_components(x2);
      x1_min = std::min(x1_min, n1);
      x1_max = std::max(x1_max, n1);
      x2_min = std::min(x2_min, n2);
      x2_max = std::max(x2_max, n2);
      line.push_back({{"y", y}, {"p", k(y)}, {"q", q}, {"x1_components", n1},
                      {"x2_components", n2}});
    }
    components["solution_line"] = line;
    components["solution_line_summary"] = {{"x1_min", x1_min}, {"x1_max", x1_max},
                                           {"x2_min", x2_min}, {"x2_max", x2_max}};
  }
  report["components"] = components;
  report["warnings"] = warnings;
  write_json(c.out / "report.json", report);
  std::cout << "diagnose " << c.preset << ": " << lattice.size() << " lattice points, "
            << warnings.size() << " warnings\n";
  return kExitOk;
}

int cmd_verify(const RunConfig& c) {
  Setup s = make_setup(c);
  const TransportProblem& problem = s.problem;
  const fs::path sol_path = c.solution ? *c.solution : c.out / "solution.csv";
  if (!fs::exists(sol_path)) throw Error(ErrorCode::Config, "solution file " + sol_path.string() + " not found");
  const PotentialSolution sol = read_solution_csv(sol_path, problem.target());
  fs::create_directories(c.out);

  Json block{{"solution_file", sol_path.generic_string()}};
  Json checks = Json::object();
  bool ok = true;
  auto check = [&](const char* name, double value, double limit) {
    const bool pass = value <= limit;
    ok = ok && pass;
    checks[name] = {{"value", value}, {"threshold", limit}, {"pass", pass}};
  };
  auto fail = [&](const char* name, const Error& e) {
    ok = false;
    checks[name] = {{"pass", false}, {"error", error_json(e)}};
  };

  try {
    const auto pf = verify_pushforward(problem, reconstruct_map(problem, sol), c.samples, c.bins,
                                       c.seed);
    block["pushforward"] = {{"tv_distance", pf.tv_distance},
                            {"empirical", pf.empirical},
                            {"expected", pf.expected}};
    check("pushforward_tv", pf.tv_distance, c.thresholds.tv);
  } catch (const Error& e) {
    fail("pushforward_tv", e);
  }

  try {
    double worst = 0.0;
    Json points = Json::array();
    for (std::size_t i : spread_indices(sol.y.size(), c.nonlocal_points)) {
      const NonlocalReport r = verify_nonlocal(problem, sol, sol.y[i]);
      worst = std::max(worst, r.residual);
      points.push_back({{"y", sol.y[i]}, {"residual", r.residual}, {"members", r.members},
                        {"quadrature_points", r.quadrature_points}});
    }
    block["nonlocal"] = {{"max_residual", worst}, {"points", points}};
    check("nonlocal_residual", worst, c.thresholds.nonlocal);
  } catch (const Error& e) {
    fail("nonlocal_residual", e);
  }

  try {
    const JacobianReport jr = jacobian_check(
        problem, sol, region_samples(problem.region(), c.jacobian_samples, c.seed + 1));
    block["jacobian"] = {{"max_relative_error", jr.max_relative_error}, {"used", jr.used},
                         {"excluded", jr.excluded}};
    check("jacobian", jr.max_relative_error, c.thresholds.jacobian);
  } catch (const Error& e) {
    fail("jacobian", e);
  }

  try {
    const DiscreteProblem dp = discretize(problem, c.nx, c.ny);
    std::vector<double> u(dp.rows()), v(dp.cols());
    for (std::size_t i = 0; i < dp.rows(); ++i)
      u[i] = assemble_conjugate(problem, sol, dp.x_points[i]).u;
    for (std::size_t j = 0; j < dp.cols(); ++j) v[j] = sol.v_at(dp.y_points[j]);
    const GapReport g = duality_gap_report(dp, u, v);
    block["duality"] = {{"gap", g.gap},
                        {"lp_value", g.lp_value},
                        {"candidate_value", g.candidate_value},
                        {"repaired_rows", g.repaired_rows},
                        {"nx", c.nx},
                        {"ny", c.ny}};
    check("duality_gap", std::abs(g.gap), c.thresholds.duality_gap);
  } catch (const Error& e) {
    fail("duality_gap", e);
  }

  try {
    PotentialSolution with_g2 = sol;
    with_g2.G2 = equation_values(problem, sol);
    const double mass = solution_mass(with_g2);
    block["mass"] = {{"mass", mass}, {"mass_residual", std::abs(mass - 1.0)}};
    check("mass_residual", std::abs(mass - 1.0), c.thresholds.mass);
  } catch (const Error& e) {
    fail("mass_residual", e);
  }

  block["checks"] = checks;
  block["pass"] = ok;
  const fs::path report_path = c.out / "report.json";
  Json report = Json::object();
  if (fs::exists(report_path)) {
    try {
      report = read_json(report_path);
    } catch (const Error&) {
      report = Json::object();
    }
  }
  report["verification"] = block;
  write_json(report_path, report);
  std::cout << "verify " << c.preset << ": " << (ok ? "pass" : "FAIL") << '\n';
  for (const auto& [name, entry] : checks.items()) {
    std::cout << "  " << name << ": " << (entry["pass"].get<bool>() ? "pass" : "FAIL");
    if (entry.contains("value")) std::cout << " (" << format_real(entry["value"]) << ")";
    std::cout << '\n';
  }
  return ok ? kExitOk : kExitVerification;
}

int cmd_oracle(const RunConfig& c) {
  Setup s = make_setup(c);
  const TransportProblem& problem = s.problem;
  fs::create_directories(c.out);
  int code = kExitOk;
  Json report{{"command", "oracle"}, {"config", config_to_json(c)}, {"preset", c.preset}};
  try {
    const DiscreteProblem dp = discretize(problem, c.nx, c.ny);
    const CouplingSolution sol = solve_lp(dp);
    report["rows"] = dp.rows();
    report["cols"] = dp.cols();
    report["value"] = sol.value;
    report["dual_value"] = sol.dual_value;
    report["strong_duality_residual"] = std::abs(sol.value - sol.dual_value);
    report["pivots"] = sol.pivots;
    if (s.preset.exact) {
      const double cc = c.convexify_coefficient;
      std::vector<double> u(dp.rows()), v(dp.cols());
      for (std::size_t i = 0; i < dp.rows(); ++i) u[i] = s.preset.exact->u(dp.x_points[i]);
      for (std::size_t j = 0; j < dp.cols(); ++j)
        v[j] = s.preset.exact->v(dp.y_points[j]) + 0.5 * cc * dp.y_points[j] * dp.y_points[j];
      const GapReport g = duality_gap_report(dp, u, v, sol.value);
      report["exact_potential_gap"] = {{"gap", g.gap}, {"repaired_rows", g.repaired_rows}};
    }
    report["instance"] = to_json(dp);
    report["solution"] = to_json(sol);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    report["error"] = error_json(e);
    code = kExitSolver;
  }
  write_json(c.out / "oracle.json", report);
  if (report.contains("value")) {
    std::cout << "oracle " << c.preset << ": value " << format_real(report["value"])
              << ", strong duality residual " << format_real(report["strong_duality_residual"])
              << '\n';
  } else {
    std::cerr << report["error"]["message"].get<std::string>() << '\n';
  }
  return code;
}

// ---------------------------------------------------------------------------
// Front-end.

int run_cli(int argc, char** argv) {
  CLI::App app{"Optimal transport to a one-dimensional target: solve, diagnose, verify, oracle"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, preset, out, bc, solution;
    std::uint64_t seed = 0;
    int cells = 0, ode_steps = 0, nx = 0, ny = 0, samples = 0, bins = 0;
    double convexify = 0.0, initial_k = 0.0;
  } flags;

  std::vector<std::pair<CLI::App*, std::string>> subs;
  std::vector<CLI::Option*> options;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--preset", flags.preset, "preset name (annulus, strip, tilted)");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "seed for sampling");
    sub->add_option("--cells", flags.cells, "tracing lattice cells per side");
    sub->add_option("--ode-steps", flags.ode_steps, "ODE grid steps");
    sub->add_option("--bc", flags.bc, "initial | nested | periodic-shooting");
    sub->add_option("--initial-k", flags.initial_k, "k at the first grid point / first shooting guess");
    sub->add_option("--convexify", flags.convexify, "convexify coefficient c in s + c y^2/2");
    sub->add_option("--nx", flags.nx, "oracle source grid side");
    sub->add_option("--ny", flags.ny, "oracle target atoms");
    sub->add_option("--samples", flags.samples, "pushforward samples");
    sub->add_option("--bins", flags.bins, "pushforward histogram bins");
    sub->add_option("--solution", flags.solution, "solution.csv to verify");
  };
  const std::pair<const char*, const char*> commands[] = {
      {"solve", "march the potential ODE; write solution.csv, levelsets.csv, report.json"},
      {"diagnose", "surplus margins and level-set component counts; report.json only"},
      {"verify", "check a solution: pushforward, nonlocal residual, Jacobian, duality gap, mass"},
      {"oracle", "solve the discretized transport LP exactly; write oracle.json"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    subs.emplace_back(sub, name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  CLI::App* sub = nullptr;
  std::string command;
  for (auto& [s, name] : subs)
    if (s->parsed()) {
      sub = s;
      command = name;
    }

  try {
    RunConfig c;
    if (sub->count("--config")) c = load_config(flags.config);
    if (sub->count("--preset")) c.preset = flags.preset;
    if (sub->count("--out")) c.out = flags.out;
    if (sub->count("--seed")) c.seed = flags.seed;
    if (sub->count("--cells")) c.cells = flags.cells;
    if (sub->count("--ode-steps")) c.ode_steps = flags.ode_steps;
    if (sub->count("--bc")) c.bc = flags.bc;
    if (sub->count("--initial-k")) c.initial_k = flags.initial_k;
    if (sub->count("--convexify")) c.convexify_coefficient = flags.convexify;
    if (sub->count("--nx")) c.nx = flags.nx;
    if (sub->count("--ny")) c.ny = flags.ny;
    if (sub->count("--samples")) c.samples = flags.samples;
    if (sub->count("--bins")) c.bins = flags.bins;
    if (sub->count("--solution")) c.solution = flags.solution;

    if (command == "solve") return cmd_solve(c);
    if (command == "diagnose") return cmd_diagnose(c);
    if (command == "verify") return cmd_verify(c);
    return cmd_oracle(c);
  } catch (const Error& e) {
    std::cerr << "udot " << command << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "udot " << command << ": " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace udot
