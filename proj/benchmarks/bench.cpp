#include <benchmark/benchmark.h>

#include "mfnn/data.hpp"
#include "mfnn/finite_net.hpp"
#include "mfnn/limit_ode.hpp"

using namespace mfnn;

namespace {

const InitDistribution kBox{-1, 1, -1, 1, -1, 1, -1, 1};

void BM_forward_two_layer(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Activation a = Activation::sigmoid();
  const TwoLayerParams p = init_two_layer(kBox, n, n, 2, 1);
  const std::vector<double> x{0.3, -0.7};
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_two_layer(p, a, x).g);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_forward_two_layer)->RangeMultiplier(2)->Range(32, 512)->Complexity();

void BM_sgd_step_two_layer(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Activation a = Activation::sigmoid();
  TwoLayerParams p = init_two_layer(kBox, n, n, 2, 1);
  const GroupRates rates = learning_rates({ScheduleMode::Scaled, 2, 1.0}, {n, n, 1});
  const std::vector<double> x{0.3, -0.7};
  for (auto _ : state) {
    sgd_step_two_layer(p, x, 0.5, a, rates);
    benchmark::DoNotOptimize(p.C[0]);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_sgd_step_two_layer)->RangeMultiplier(2)->Range(32, 512)->Complexity();

void BM_limit_rhs(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const Activation a = Activation::sigmoid();
  const TeacherSpec teacher = TeacherSpec::from_name("affine-sigmoid", {1.2, 2.0, 0.5});
  const Dataset ds = Dataset::generate(teacher, 1, 64, DomainBounds{}, 1);
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, m, m, 4, 1, 1);
  const LimitState st = LimitState::from_pools(pools);
  for (auto _ : state) {
    benchmark::DoNotOptimize(limit_rhs(st, ds, a).dC[0]);
  }
  state.SetComplexityN(m);
}
BENCHMARK(BM_limit_rhs)->RangeMultiplier(2)->Range(16, 256)->Complexity();

}  // namespace

BENCHMARK_MAIN();
