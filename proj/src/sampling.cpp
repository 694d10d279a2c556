#include "udot/sampling.hpp"

#include <array>
#include <random>
#include <stdexcept>

namespace udot {

namespace {
constexpr std::array<unsigned, 8> kPrimes = {2, 3, 5, 7, 11, 13, 17, 19};
}

double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

HaltonSampler::HaltonSampler(int dim, std::uint64_t seed) {
  if (dim < 1 || dim > static_cast<int>(kPrimes.size())) {
    throw std::invalid_argument("HaltonSampler: dimension out of range");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  shift_.resize(dim);
  for (auto& s : shift_) s = u(rng);
}

std::vector<double> HaltonSampler::next() {
  std::vector<double> out(shift_.size());
  for (std::size_t d = 0; d < shift_.size(); ++d) {
    double v = radical_inverse(index_, kPrimes[d]) + shift_[d];
    out[d] = v >= 1.0 ? v - 1.0 : v;
  }
  ++index_;
  return out;
}

}  // namespace udot
