#include <benchmark/benchmark.h>

#include "fbcast/chain_model.hpp"
#include "fbcast/feedback_lp.hpp"
#include "fbcast/matrix.hpp"
#include "fbcast/mrp.hpp"
#include "fbcast/rng.hpp"
#include "fbcast/sim.hpp"

namespace {

using namespace fbcast;

Matrix random_matrix(std::size_t n, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rng.next_double();
  return m;
}

void BM_MatrixMultiply(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix a = random_matrix(n, 1), b = random_matrix(n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(multiply(a, b));
  }
}
BENCHMARK(BM_MatrixMultiply)->Arg(6)->Arg(10);

void BM_MatrixInverse(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix a = random_matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(inverse(a));
  }
}
BENCHMARK(BM_MatrixInverse)->Arg(6)->Arg(10);

void BM_UncodedFixedPoint(benchmark::State& state) {
  ChannelTriple eps{{0.3, 0.4, 0.7}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_uncoded_lp(eps));
  }
}
BENCHMARK(BM_UncodedFixedPoint);

void BM_UncodedVertexOracle(benchmark::State& state) {
  ChannelTriple eps{{0.3, 0.4, 0.7}};
  LpProblem p = uncoded_lp_problem(eps);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_small_lp(p));
  }
}
BENCHMARK(BM_UncodedVertexOracle);

void BM_ChainModelBuild(benchmark::State& state) {
  for (auto _ : state) {
    ChainMrp model = build_chain_mrp(0.1, 0.4, 0.6);
    benchmark::DoNotOptimize(per_run_rewards(model, ChainRoles{0, 1, 2, 1}));
  }
}
BENCHMARK(BM_ChainModelBuild);

void BM_SimulateSmall(benchmark::State& state) {
  SimConfig cfg{10000,
                ChannelTriple{{0.3, 0.4, 0.5}},
                DistortionTriple{{0.09, 0.16, 0.25}},
                7};
  for (auto _ : state) {
    Simulator sim(cfg);
    benchmark::DoNotOptimize(sim.run());
  }
}
BENCHMARK(BM_SimulateSmall);

}  // namespace

BENCHMARK_MAIN();
