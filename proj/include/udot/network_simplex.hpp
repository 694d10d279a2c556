#pragma once

#include <cstddef>
#include <vector>

namespace udot {

/// Primal network simplex for the dense transportation problem
///   minimize sum c_ij x_ij  s.t.  row sums = a, column sums = b, x >= 0.
/// Uses an artificial root with big-M arcs, a strongly feasible spanning
/// tree (no cycling under degeneracy) and block pricing.
class TransportationSimplex {
 public:
  struct Flow {
    std::size_t i;
    std::size_t j;
    double amount;
  };

  struct Result {
    std::vector<Flow> flows;   // basic arcs with positive flow
    std::vector<double> row_potential;  // pi of source nodes
    std::vector<double> col_potential;  // pi of sink nodes
    double cost = 0.0;
    long pivots = 0;
  };

  /// cost is row-major rows x cols. Weights must be balanced.
  Result solve(const std::vector<double>& a, const std::vector<double>& b,
               const std::vector<double>& cost) const;
};

}  // namespace udot
