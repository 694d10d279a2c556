#pragma once

#include <cstdint>
#include <vector>

namespace udot {

/// Randomly shifted Halton sequence in [0,1)^dim. The shift is drawn from
/// the seed, so two samplers with equal (dim, seed) yield identical streams.
class HaltonSampler {
 public:
  HaltonSampler(int dim, std::uint64_t seed);

  /// Next point of the sequence, one coordinate per dimension.
  std::vector<double> next();

  int dim() const { return static_cast<int>(shift_.size()); }

 private:
  std::vector<double> shift_;
  std::uint64_t index_ = 1;
};

/// Radical inverse of i in the given base.
double radical_inverse(std::uint64_t i, unsigned base);

}  // namespace udot
