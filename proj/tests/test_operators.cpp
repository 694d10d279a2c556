#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "udot/operators.hpp"
#include "udot/presets.hpp"
#include "udot/sampling.hpp"

using namespace udot;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kCells = 256;

struct Fixture {
  Preset strip = strip_preset();
  Preset annulus = annulus_preset();
  Preset tilted = tilted_preset();
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

double G2(const Preset& p, OperatorPoint pt) { return eval_G2(*p.model, p.region, p.f, pt, kCells); }

}  // namespace

TEST(Operators, AnnulusG2) {
  const auto& a = fx().annulus;
  EXPECT_NEAR(G2(a, {0, 0, 0}), 1 / (2 * kPi), 1e-3);
  EXPECT_NEAR(G2(a, {1.3, 0, 0}), 1 / (2 * kPi), 1e-3);
  EXPECT_NEAR(G2(a, {0, 0, 0.3}), 1 / (2 * kPi) + 0.6 / (3 * kPi), 1e-3);
}

TEST(Operators, StripG2IsQ) {
  const auto& s = fx().strip;
  EXPECT_NEAR(G2(s, {0.4, 0.5, 2.0}), 2.0, 1e-6);
  EXPECT_NEAR(eval_G1(*s.model, s.region, s.f, {0.4, 0.5, 2.0}, kCells), 2.0, 1e-6);
}

TEST(Operators, AnnulusG1Cancels) {
  const auto& a = fx().annulus;
  EXPECT_NEAR(eval_G1(*a.model, a.region, a.f, {0, 0, 0}, kCells), 0.0, 1e-3);
}

TEST(Operators, G1EqualsG2AboveMaxSyy) {
  const auto& t = fx().tilted;
  const OperatorPoint pt{0.5, 0.6, 1.5};  // s_yy = x2 <= 1
  EXPECT_NEAR(eval_G1(*t.model, t.region, t.f, pt, kCells), G2(t, pt), 1e-12);
  EXPECT_NEAR(dG1_dq(*t.model, t.region, t.f, pt, kCells),
              dG2_dq(*t.model, t.region, t.f, pt, kCells), 1e-12);
}

TEST(Operators, QSlopes) {
  const auto& s = fx().strip;
  EXPECT_NEAR(dG2_dq(*s.model, s.region, s.f, {0.3, 0.5, 0.5}, kCells), 1.0, 1e-9);
  EXPECT_NEAR(dG1_dq(*s.model, s.region, s.f, {0.3, 0.5, 0.5}, kCells), 1.0, 1e-9);
  const auto& a = fx().annulus;
  EXPECT_NEAR(dG2_dq(*a.model, a.region, a.f, {0, 0, 0}, kCells), 2 / (3 * kPi), 1e-3);
  EXPECT_NEAR(dG1_dq(*a.model, a.region, a.f, {0, 0, 0}, kCells), 4 / (3 * kPi), 1e-3);
}

TEST(Operators, MovingDerivativesVanishOnStrip) {
  const auto& s = fx().strip;
  EXPECT_NEAR(dG2_dp(*s.model, s.region, s.f, {0.4, 0.5, 2.0}, kCells), 0.0, 1e-6);
  EXPECT_NEAR(dG2_dy(*s.model, s.region, s.f, {0.4, 0.5, 2.0}, kCells), 0.0, 1e-6);
}

TEST(Operators, AnnulusDerivativesMatchFiniteDifferences) {
  const auto& a = fx().annulus;
  const double h = 1e-4;
  const OperatorPoint pt{0, 0, 0};
  const double fd_p = (G2(a, {0, h, 0}) - G2(a, {0, -h, 0})) / (2 * h);
  EXPECT_NEAR(dG2_dp(*a.model, a.region, a.f, pt, kCells), fd_p, 1e-3);
  EXPECT_NEAR(dG2_dy(*a.model, a.region, a.f, pt, kCells), 0.0, 1e-3);
}

// Relative error with an absolute floor of 1e-2 on the scale.
double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-2); }

class FiniteDifferenceTest : public ::testing::TestWithParam<const char*> {};

TEST_P(FiniteDifferenceTest, AnalyticMatchesCentralDifferences) {
  const Preset p = make_preset(GetParam());
  const TargetDomain t = p.model->target();
  HaltonSampler hs(3, 77);
  int tested = 0;
  const double h = 1e-4;
  while (tested < 10) {
    const auto u = hs.next();
    const double y = t.lo + (t.periodic ? u[0] : 0.1 + 0.8 * u[0]) * t.length();
    const double pv = t.periodic ? -0.4 + 0.8 * u[1] : 0.1 + 0.8 * u[1];
    const double q = 0.1 + 1.4 * u[2];
    const OperatorPoint pt{y, pv, q};
    if (G2(p, pt) < 1e-6) continue;
    auto g = [&](double dy, double dp, double dq) { return G2(p, {y + dy, pv + dp, q + dq}); };
    const double fq = (g(0, 0, h) - g(0, 0, -h)) / (2 * h);
    const double fp = (g(0, h, 0) - g(0, -h, 0)) / (2 * h);
    const double fy = (g(h, 0, 0) - g(-h, 0, 0)) / (2 * h);
    const double g1q = (eval_G1(*p.model, p.region, p.f, {y, pv, q + h}, kCells) -
                        eval_G1(*p.model, p.region, p.f, {y, pv, q - h}, kCells)) /
                       (2 * h);
    EXPECT_LE(rel(dG2_dq(*p.model, p.region, p.f, pt, kCells), fq), 1e-3);
    EXPECT_LE(rel(dG2_dp(*p.model, p.region, p.f, pt, kCells), fp), 1e-3);
    EXPECT_LE(rel(dG2_dy(*p.model, p.region, p.f, pt, kCells), fy), 1e-3);
    EXPECT_LE(rel(dG1_dq(*p.model, p.region, p.f, pt, kCells), g1q), 1e-3);
    ++tested;
  }
}

INSTANTIATE_TEST_SUITE_P(Presets, FiniteDifferenceTest,
                         ::testing::Values("annulus", "strip", "tilted"));

TEST(Operators, InvertG2Examples) {
  const auto& s = fx().strip;
  EXPECT_NEAR(invert_G2(*s.model, s.region, s.f, 0.3, 0.5, 2.0, kCells), 2.0, 1e-8);
  const auto& a = fx().annulus;
  EXPECT_NEAR(invert_G2(*a.model, a.region, a.f, 0, 0, 1 / (2 * kPi), kCells), 0.0, 1e-6);
  EXPECT_NEAR(invert_G2(*a.model, a.region, a.f, 0, 0, 1 / (2 * kPi) + 0.2 / (3 * kPi), kCells),
              0.1, 1e-5);
}

TEST(Operators, InvertG2RoundTrip) {
  const auto& t = fx().tilted;
  for (double beta : {0.05, 0.4, 1.0, 3.0}) {
    const LevelSlice slice(*t.model, t.region, t.f, 0.45, 0.55, kCells);
    const Inversion inv = invert_G2(slice, beta);
    EXPECT_NEAR(slice.G2(inv.q), beta, 1e-7 * beta);
    EXPECT_NEAR(G2(t, {0.45, 0.55, inv.q}), beta, 1e-7 * beta);
  }
}

TEST(Operators, InvertG2Errors) {
  const auto& s = fx().strip;
  try {
    invert_G2(*s.model, s.region, s.f, 0.3, 0.5, 0.0, kCells);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveMass);
  }
  try {
    invert_G2(*s.model, s.region, s.f, 0.3, 1.5, 1.0, kCells);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyLevelSet);
  }
}

TEST(Operators, EllipticityConstant) {
  const auto& s = fx().strip;
  const auto e = ellipticity_constant(*s.model, s.region, s.f, {0.3, 0.5, 2.0}, kCells);
  EXPECT_NEAR(e.theta, 2.0, 1e-12);
  EXPECT_NEAR(e.lambda, 1.0, 1e-6);
  const auto& a = fx().annulus;
  const auto ea = ellipticity_constant(*a.model, a.region, a.f, {0, 0, 0}, kCells);
  EXPECT_NEAR(ea.theta, 1.0, 1e-3);
  EXPECT_NEAR(ea.lambda, 1 / (2 * kPi), 1e-3);
  try {
    ellipticity_constant(*a.model, a.region, a.f, {0, 0, -2}, kCells);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotElliptic);
  }
}

TEST(Operators, DegenerateAndStrictEllipticity) {
  for (const Preset* p : {&fx().annulus, &fx().tilted}) {
    HaltonSampler hs(3, 5);
    const TargetDomain t = p->model->target();
    int tested = 0;
    while (tested < 20) {
      const auto u = hs.next();
      const OperatorPoint pt{t.lo + u[0] * t.length(), (t.periodic ? -0.5 : 0.1) + 0.8 * u[1],
                             -0.5 + 2 * u[2]};
      const LevelSlice slice(*p->model, p->region, p->f, pt.y, pt.p, kCells);
      const double g0 = slice.G2(pt.q);
      EXPECT_GE(g0, 0.0);
      if (g0 <= 0) continue;
      const Ellipticity e = ellipticity_constant(slice, pt.q);
      for (double dq : {0.1, 0.5, 1.0}) {
        const double g1 = slice.G2(pt.q + dq);
        EXPECT_GE(g1, g0 - 1e-9);
        EXPECT_GE(g1 - g0, e.lambda * dq - 1e-3 * dq);
      }
      ++tested;
    }
  }
}

TEST(Operators, OperatorCsv) {
  const auto& s = fx().strip;
  const auto rows = evaluate_batch(*s.model, s.region, s.f, {{0.3, 0.5, 1.0}, {0.6, 0.2, 2.0}}, 64);
  const auto path = std::filesystem::temp_directory_path() / "udot_operator_test.csv";
  write_operator_csv(path, rows);
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "y,p,q,G1,G2,dG2dq,lambda");
  EXPECT_NEAR(rows[1].G2, 2.0, 1e-9);
  EXPECT_NEAR(rows[1].lambda, 1.0, 1e-9);
  std::filesystem::remove(path);
}
