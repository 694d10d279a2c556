#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "udot/kernels.hpp"
#include "udot/operators.hpp"
#include "udot/presets.hpp"

using namespace udot;
using namespace udot::kernels;

namespace {

double field(Vec2 x) { return std::sin(5 * x.x1) * std::cos(3 * x.x2) + x.x1 * x.x2; }

void BM_SampleLattice(benchmark::State& st) {
  const Lattice lat = make_lattice({{0, 0}, {1, 1}}, static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sample_lattice(lat, field));
}

void BM_SampleLatticeSerial(benchmark::State& st) {
  const Lattice lat = make_lattice({{0, 0}, {1, 1}}, static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sample_lattice_serial(lat, field));
}

struct ClipSetup {
  Lattice lat;
  std::vector<double> disc;
  ScalarField exact = [](Vec2 x) { return norm(x) - 0.8; };
  explicit ClipSetup(int cells) : lat(make_lattice({{-1, -1}, {1, 1}}, cells)) {
    disc = sample_lattice(lat, exact);
  }
};

void BM_ClippedIntegral(benchmark::State& st) {
  ClipSetup s(static_cast<int>(st.range(0)));
  std::vector<Constraint> cs{{s.disc, s.exact}};
  for (auto _ : st) benchmark::DoNotOptimize(clipped_integral(s.lat, cs, field));
}

void BM_ClippedIntegralSerial(benchmark::State& st) {
  ClipSetup s(static_cast<int>(st.range(0)));
  std::vector<Constraint> cs{{s.disc, s.exact}};
  for (auto _ : st) benchmark::DoNotOptimize(clipped_integral_serial(s.lat, cs, field));
}

std::vector<OperatorPoint> batch_points() {
  std::vector<OperatorPoint> pts;
  for (int i = 0; i < 16; ++i) pts.push_back({0.1 + 0.05 * i, 0.3 + 0.02 * i, 0.6});
  return pts;
}

void BM_OperatorBatch(benchmark::State& st) {
  const Preset t = tilted_preset();
  const auto pts = batch_points();
  for (auto _ : st)
    benchmark::DoNotOptimize(evaluate_batch(*t.model, t.region, t.f, pts, static_cast<int>(st.range(0))));
}

void BM_OperatorBatchSerial(benchmark::State& st) {
  const Preset t = tilted_preset();
  const auto pts = batch_points();
  for (auto _ : st)
    benchmark::DoNotOptimize(
        evaluate_batch_serial(*t.model, t.region, t.f, pts, static_cast<int>(st.range(0))));
}

}  // namespace

BENCHMARK(BM_SampleLattice)->Arg(128)->Arg(512);
BENCHMARK(BM_SampleLatticeSerial)->Arg(128)->Arg(512);
BENCHMARK(BM_ClippedIntegral)->Arg(64)->Arg(256);
BENCHMARK(BM_ClippedIntegralSerial)->Arg(64)->Arg(256);
BENCHMARK(BM_OperatorBatch)->Arg(128);
BENCHMARK(BM_OperatorBatchSerial)->Arg(128);

BENCHMARK_MAIN();
