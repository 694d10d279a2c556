// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "udot/operators.hpp"
#include "udot/oracle.hpp"
#include "udot/sampling.hpp"
#include "udot/solver.hpp"

using namespace udot;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::vector<double> accepted_masses;

PotentialSolution solve(const TransportProblem& prob) {
  PotentialSolution sol = solve_ode(prob, default_boundary(prob));
  accepted_masses.push_back(solution_mass(sol));
  return sol;
}

double max_abs_diff(const std::vector<double>& a, const std::function<double(std::size_t)>& ref) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - ref(i)));
  return m;
}

void annulus_golden(Outcome& o) {
  const Preset p = annulus_preset();
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto t0 = std::chrono::steady_clock::now();
  const TransportProblem prob = TransportProblem::from_preset(p, 256, 256);
  const PotentialSolution sol = solve(prob);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  omp_set_num_threads(threads);

  const double ek = max_abs_diff(sol.k, [](std::size_t) { return 0.0; });
  const double ev = max_abs_diff(sol.v, [](std::size_t) { return 0.0; });
  double eg = 0.0;
  for (double y : sol.y)
    eg = std::max(eg, std::abs(eval_G2(prob.model(), prob.region(), prob.f(), {y, 0, 0}, 256) -
                               1 / (2 * kPi)));
  int bad_components = 0;
  for (std::size_t i = 0; i < sol.size(); ++i)
    if (sol.x1_components[i] != 2 || sol.x2_components[i] != 1) ++bad_components;

  o.detail << "max|k|=" << ek << " max|v|=" << ev << " max|G2-1/2pi|=" << eg
           << " component mismatches=" << bad_components << " time=" << seconds << "s";
  o.require(ek <= 1e-3, "max|k| <= 1e-3");
  o.require(ev <= 1e-3, "max|v| <= 1e-3");
  o.require(eg <= 1e-3, "G2 = 1/(2 pi) +- 1e-3");
  o.require(bad_components == 0, "X1 = 2, X2 = 1 components");
  o.require(seconds <= 30.0, "runtime <= 30 s");
}

void strip_exact(Outcome& o) {
  const Preset p = strip_preset();
  const TransportProblem prob = TransportProblem::from_preset(p, 256, 256);
  const PotentialSolution sol = solve(prob);
  const double ek = max_abs_diff(sol.k, [&](std::size_t i) { return sol.y[i]; });
  const auto pf = verify_pushforward(prob, reconstruct_map(prob, sol), 100000, 50, 1);
  const auto jr = jacobian_check(prob, sol, region_samples(prob.region(), 200, 3));
  o.detail << "max|k-y|=" << ek << " TV=" << pf.tv_distance
           << " jacobian max rel err=" << jr.max_relative_error << " (" << jr.used << " used)";
  o.require(ek <= 1e-4, "max|k-y| <= 1e-4");
  o.require(pf.tv_distance <= 0.02, "TV <= 0.02");
  o.require(jr.max_relative_error <= 1e-3 && jr.used > 0, "Jacobian <= 1e-3");
}

struct SampleBox {
  double y0, y1, p0, p1, q0, q1;
};

SampleBox operator_box(const Preset& p) {
  if (p.model->target().periodic) return {0.0, kTwoPi, -0.4, 0.4, -0.5, 1.5};
  if (p.name == "strip") return {0.05, 0.95, 0.05, 0.95, 0.1, 2.0};
  return {0.1, 0.9, 0.15, 0.85, 0.1, 1.5};
}

void derivative_oracle(Outcome& o) {
  // Relative error |a - fd| / max(|fd|, 1e-2).
  const int cells = 256;
  const double h = 1e-4;
  for (const char* name : {"annulus", "strip", "tilted"}) {
    const Preset p = make_preset(name);
    const SampleBox b = operator_box(p);
    HaltonSampler hs(3, 2024);
    double worst[4] = {0, 0, 0, 0};
    int tested = 0, drawn = 0;
    while (tested < 50 && drawn < 1000) {
      ++drawn;
      const auto u = hs.next();
      const OperatorPoint pt{b.y0 + u[0] * (b.y1 - b.y0), b.p0 + u[1] * (b.p1 - b.p0),
                             b.q0 + u[2] * (b.q1 - b.q0)};
      auto G = [&](double dy, double dp, double dq) {
        return eval_G2(*p.model, p.region, p.f, {pt.y + dy, pt.p + dp, pt.q + dq}, cells);
      };
      if (G(0, 0, 0) <= 1e-6) continue;
      auto G1 = [&](double dq) { return eval_G1(*p.model, p.region, p.f, {pt.y, pt.p, pt.q + dq}, cells); };
      const double fd[4] = {(G(0, 0, h) - G(0, 0, -h)) / (2 * h), (G(0, h, 0) - G(0, -h, 0)) / (2 * h),
                            (G(h, 0, 0) - G(-h, 0, 0)) / (2 * h), (G1(h) - G1(-h)) / (2 * h)};
      const double an[4] = {dG2_dq(*p.model, p.region, p.f, pt, cells),
                            dG2_dp(*p.model, p.region, p.f, pt, cells),
                            dG2_dy(*p.model, p.region, p.f, pt, cells),
                            dG1_dq(*p.model, p.region, p.f, pt, cells)};
      for (int i = 0; i < 4; ++i)
        worst[i] = std::max(worst[i], std::abs(an[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-2));
      ++tested;
    }
    o.detail << name << ": n=" << tested << " q=" << worst[0] << " p=" << worst[1] << " y=" << worst[2]
             << " G1q=" << worst[3] << "; ";
    o.require(tested == 50, std::string(name) + " 50 points");
    o.require(*std::max_element(worst, worst + 4) <= 1e-3, std::string(name) + " within 1e-3");
  }
}

void ellipticity_suite(Outcome& o) {
  const int cells = 256;
  for (const char* name : {"annulus", "strip", "tilted"}) {
    const Preset p = make_preset(name);
    const SampleBox b = operator_box(p);
    HaltonSampler hs(3, 99);
    int tested = 0, drawn = 0, violations = 0;
    double worst_mono = 0.0, worst_strict = 0.0;
    while (tested < 100 && drawn < 2000) {
      ++drawn;
      const auto u = hs.next();
      const OperatorPoint pt{b.y0 + u[0] * (b.y1 - b.y0), b.p0 + u[1] * (b.p1 - b.p0),
                             b.q0 - 0.5 + u[2] * (b.q1 - b.q0 + 0.5)};
      const LevelSlice slice(*p.model, p.region, p.f, pt.y, pt.p, cells);
      const double g0 = slice.G2(pt.q);
      if (g0 <= 0.0) continue;
      const double theta = ellipticity_constant(slice, pt.q).theta;
      for (double dq : {0.1, 0.5, 1.0}) {
        const double g1 = slice.G2(pt.q + dq);
        const double mono = g0 - 1e-9 - g1;
        const double strict = (g0 / theta) * dq - 1e-3 * dq - (g1 - g0);
        worst_mono = std::max(worst_mono, mono);
        worst_strict = std::max(worst_strict, strict);
        if (mono > 0 || strict > 0) ++violations;
      }
      ++tested;
    }
    o.detail << name << ": n=" << tested << " violations=" << violations << "; ";
    o.require(tested == 100, std::string(name) + " 100 points");
    o.require(violations == 0, std::string(name) + " monotone and strictly elliptic");
  }
}

void duality(Outcome& o) {
  const Preset ap = annulus_preset();
  const TransportProblem an = TransportProblem::from_preset(ap, 64, 16);
  std::vector<double> gaps;
  for (int nx : {15, 30, 60}) {
    const DiscreteProblem dp = discretize(an, nx, 64);
    std::vector<double> u(dp.rows()), v(dp.cols(), 0.0);
    for (std::size_t i = 0; i < dp.rows(); ++i) u[i] = norm(dp.x_points[i]);
    gaps.push_back(duality_gap(dp, u, v));
  }
  o.detail << "annulus gaps 15/30/60 = " << gaps[0] << " " << gaps[1] << " " << gaps[2];
  o.require(*std::min_element(gaps.begin(), gaps.end()) >= -1e-9, "annulus gaps >= 0");
  o.require(gaps.back() <= 1e-2, "annulus final gap <= 1e-2");
  o.require(gaps.back() <= gaps.front(), "annulus gap nonincreasing");

  const Preset sp = strip_preset();
  const TransportProblem st = TransportProblem::from_preset(sp, 256, 256);
  const PotentialSolution sol = solve(st);
  const DiscreteProblem dp = discretize(st, 30, 64);
  std::vector<double> u(dp.rows()), v(dp.cols());
  for (std::size_t i = 0; i < dp.rows(); ++i) u[i] = assemble_conjugate(st, sol, dp.x_points[i]).u;
  for (std::size_t j = 0; j < dp.cols(); ++j) v[j] = sol.v_at(dp.y_points[j]);
  const double g = duality_gap(dp, u, v);
  o.detail << "; strip solver gap 30^2 = " << g;
  o.require(g >= -1e-9 && g <= 1e-2, "strip solver gap in [0, 1e-2]");
}

void lp_exactness(Outcome& o) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst_perm = 0.0;
  int instances = 0;
  for (int k = 1; k <= 5; ++k) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> S(k * k);
      for (auto& s : S) s = U(rng);
      const auto dp = make_discrete_problem(std::vector<double>(k, 1.0 / k),
                                            std::vector<double>(k, 1.0 / k), S);
      std::vector<int> perm(k);
      std::iota(perm.begin(), perm.end(), 0);
      double best = -std::numeric_limits<double>::infinity();
      do {
        double v = 0.0;
        for (int i = 0; i < k; ++i) v += S[i * k + perm[i]] / k;
        best = std::max(best, v);
      } while (std::next_permutation(perm.begin(), perm.end()));
      worst_perm = std::max(worst_perm, std::abs(solve_lp(dp).value - best));
      ++instances;
    }
  }
  double worst_dual = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 1 + static_cast<int>(rng() % 40), n = 1 + static_cast<int>(rng() % 40);
    std::vector<double> a(m), b(n), S(m * n);
    for (auto& x : a) x = 0.05 + std::abs(U(rng));
    for (auto& x : b) x = 0.05 + std::abs(U(rng));
    const double sa = std::accumulate(a.begin(), a.end(), 0.0);
    const double sb = std::accumulate(b.begin(), b.end(), 0.0);
    for (auto& x : a) x /= sa;
    for (auto& x : b) x /= sb;
    for (auto& s : S) s = 3.0 * U(rng);
    const auto sol = solve_lp(make_discrete_problem(a, b, S));
    worst_dual = std::max(worst_dual, std::abs(sol.value - sol.dual_value));
  }
  o.detail << instances << " permutation instances, max err=" << worst_perm
           << "; 100 random, max |primal-dual|=" << worst_dual;
  o.require(worst_perm <= 1e-9, "permutation match 1e-9");
  o.require(worst_dual <= 1e-9, "strong duality 1e-9");
}

void convergence_order(Outcome& o) {
  const Preset p = strip_preset();
  std::vector<double> errs;
  for (int steps : {64, 128, 256}) {
    const TransportProblem prob = TransportProblem::from_preset(p, 256, steps);
    const PotentialSolution sol = solve(prob);
    errs.push_back(max_abs_diff(sol.k, [&](std::size_t i) { return sol.y[i]; }));
  }
  o.detail << "max k error 64/128/256 = " << errs[0] << " " << errs[1] << " " << errs[2]
           << " (floor 1e-6)";
  for (std::size_t i = 1; i < errs.size(); ++i)
    o.require(errs[i] <= 1e-6 || errs[i - 1] >= 8.0 * errs[i], "factor >= 8 or floor");
}

void mass_conservation(Outcome& o) {
  // Tilted under a convexified surplus joins the solves made above.
  const Preset t = tilted_preset();
  solve(TransportProblem::from_preset(t, 256, 128, 1.0));
  double worst = 0.0;
  for (double m : accepted_masses) worst = std::max(worst, std::abs(m - 1.0));
  o.detail << accepted_masses.size() << " solves, max |mass-1|=" << worst;
  o.require(!accepted_masses.empty() && worst <= 5e-3, "mass in 1 +- 5e-3");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    void (*run)(Outcome&);
  };
  const Criterion criteria[] = {
      {1, "annulus golden test", annulus_golden},
      {2, "strip exact test", strip_exact},
      {3, "derivative oracle suite", derivative_oracle},
      {4, "ellipticity suite", ellipticity_suite},
      {5, "duality acceptance", duality},
      {6, "LP oracle exactness", lp_exactness},
      {7, "convergence order", convergence_order},
      {8, "mass conservation", mass_conservation},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    o.detail.precision(3);
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
