#include <vector>

#include <benchmark/benchmark.h>

#include "cusp/kernels.hpp"
#include "cusp/limit_law.hpp"

using namespace cusp;

namespace {

struct SweepFixture {
  kernels::LikelihoodTerms terms;
  std::vector<double> thetas;
  std::vector<double> out;

  explicit SweepFixture(double eps) {
    CuspModel m;
    m.kappa = 0.25;
    m.T = 3.0;
    m.theta_lo = 0.5;
    m.theta_hi = 1.5;
    const auto x =
        simulate_sde(m, 1.0, eps, simulate_wiener(NoiseStream{1, 1}, steps_for_eps(m.T, eps), m.T));
    terms = kernels::prepare_terms(x, m, 1.0, eps);
    for (int i = 0; i < 201; ++i) thetas.push_back(0.5 + i / 200.0);
    out.resize(thetas.size());
  }
};

void BM_llr_sweep_serial(benchmark::State& state) {
  SweepFixture f(1.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) {
    kernels::llr_sweep_serial(f.terms, f.thetas, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.thetas.size()));
}

void BM_llr_sweep_parallel(benchmark::State& state) {
  SweepFixture f(1.0 / static_cast<double>(state.range(0)));
  for (auto _ : state) {
    kernels::llr_sweep_parallel(f.terms, f.thetas, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.thetas.size()));
}

void BM_limit_batch_serial(benchmark::State& state) {
  const FbmSampler sampler(0.75, 15.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_limit_batch_serial(sampler, StreamFamily{1, 1}, 64));
  state.SetItemsProcessed(state.iterations() * 64);
}

void BM_limit_batch_parallel(benchmark::State& state) {
  const FbmSampler sampler(0.75, 15.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_limit_batch_parallel(sampler, StreamFamily{1, 1}, 64));
  state.SetItemsProcessed(state.iterations() * 64);
}

}  // namespace

// Argument is 1/ε for the sweeps and the grid half-width for the limit batch.
BENCHMARK(BM_llr_sweep_serial)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_llr_sweep_parallel)->Arg(20)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_limit_batch_serial)->Arg(300)->Arg(1500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_limit_batch_parallel)->Arg(300)->Arg(1500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
