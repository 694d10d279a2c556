#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "udot/density.hpp"
#include "udot/geometry.hpp"
#include "udot/region.hpp"
#include "udot/surplus.hpp"

namespace udot {

/// (y, p, q) with p in the v' slot and q in the v'' slot.
struct OperatorPoint {
  double y = 0.0;
  double p = 0.0;
  double q = 0.0;
};

/// X1(y,p) traced once, with the operators evaluated for any q on it.
class LevelSlice {
 public:
  LevelSlice(const SurplusModel& model, const Region& region, const SourceDensity& f, double y,
             double p, int cells);

  const LevelSetMesh& x1() const { return x1_; }
  LevelSetMesh x2(double q) const;

  double G1(double q) const;
  double G2(double q) const;
  double dG1_dq() const;
  double dG2_dq(double q) const;
  /// min of s_yy over nodes and quadrature points of X1; +inf when empty.
  double min_s_yy() const { return min_syy_; }
  /// G2 and its q-slope on an already restricted mesh.
  double G2_on(const LevelSetMesh& x2, double q) const;
  double dG2_dq_on(const LevelSetMesh& x2) const;

  const SurplusModel& model() const { return model_; }
  const SourceDensity& density() const { return f_; }
  double y() const { return y_; }
  double p() const { return p_; }

 private:
  const SurplusModel& model_;
  const SourceDensity& f_;
  double y_;
  double p_;
  LevelSetMesh x1_;
  double min_syy_;
};

double eval_G2(const SurplusModel& model, const Region& region, const SourceDensity& f,
               OperatorPoint pt, int cells);
double eval_G1(const SurplusModel& model, const Region& region, const SourceDensity& f,
               OperatorPoint pt, int cells);
double dG2_dq(const SurplusModel& model, const Region& region, const SourceDensity& f,
              OperatorPoint pt, int cells);
double dG1_dq(const SurplusModel& model, const Region& region, const SourceDensity& f,
              OperatorPoint pt, int cells);

struct DerivativeOptions {
  double h_geo = 1e-5;             // step for the divergence of D_x s_y / |D_x s_y|^2
  double transversality_floor = 1e-4;
};

/// Moving-curve derivative in p: interior divergence term plus point terms at
/// boundary hits and sublevel cuts. Throws TransversalityLoss.
double dG2_dp(const SurplusModel& model, const Region& region, const SourceDensity& f,
              OperatorPoint pt, int cells, const DerivativeOptions& opts = {});
/// Same in y, including the explicit y-dependence of the integrand.
double dG2_dy(const SurplusModel& model, const Region& region, const SourceDensity& f,
              OperatorPoint pt, int cells, const DerivativeOptions& opts = {});

struct InvertOptions {
  double rel_tol = 1e-8;
  double length_floor = 1e-12;
  double slope_floor = 1e-12;
  int max_iterations = 200;
  std::optional<double> q_guess;  // warm start
};

struct Inversion {
  double q = 0.0;
  double G2 = 0.0;
  int iterations = 0;
};

/// Solves G2(y,p,q) = beta for q. Throws NonPositiveMass, EmptyLevelSet, BracketFailure.
Inversion invert_G2(const LevelSlice& slice, double beta, const InvertOptions& opts = {});
double invert_G2(const SurplusModel& model, const Region& region, const SourceDensity& f,
                 double y, double p, double beta, int cells, const InvertOptions& opts = {});

struct Ellipticity {
  double lambda = 0.0;
  double theta = 0.0;
  double G2 = 0.0;
};

/// lambda = G2 / Theta, Theta = max of (q - s_yy) on X2. Throws NotElliptic if G2 <= 0.
Ellipticity ellipticity_constant(const LevelSlice& slice, double q);
Ellipticity ellipticity_constant(const SurplusModel& model, const Region& region,
                                 const SourceDensity& f, OperatorPoint pt, int cells);

struct OperatorValues {
  OperatorPoint pt;
  double G1 = 0.0;
  double G2 = 0.0;
  double dG2dq = 0.0;
  double lambda = 0.0;  // 0 where G2 <= 0
};

std::vector<OperatorValues> evaluate_batch(const SurplusModel& model, const Region& region,
                                           const SourceDensity& f,
                                           const std::vector<OperatorPoint>& pts, int cells);
std::vector<OperatorValues> evaluate_batch_serial(const SurplusModel& model, const Region& region,
                                                  const SourceDensity& f,
                                                  const std::vector<OperatorPoint>& pts, int cells);

/// Columns y,p,q,G1,G2,dG2dq,lambda.
void write_operator_csv(const std::filesystem::path& path, const std::vector<OperatorValues>& rows);

}  // namespace udot
