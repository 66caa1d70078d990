#include <benchmark/benchmark.h>

#include <cmath>

#include "pofd/eigensystem.hpp"
#include "pofd/simulation.hpp"
#include "pofd/smoothing.hpp"

namespace {

pofd::FunctionalDataset sample(std::size_t n, std::size_t grid_size = 51) {
  pofd::DgpConfig config;
  config.n = n;
  config.grid_size = grid_size;
  config.n_targets = 1;
  return pofd::generate_dgp(config, 0).data;
}

void BM_Mean(benchmark::State& state) {
  const auto data = sample(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pofd::llk_mean(data, data.grid, 0.1));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Mean)->RangeMultiplier(2)->Range(50, 400)->Complexity();

void BM_Covariance(benchmark::State& state) {
  const auto data = sample(static_cast<std::size_t>(state.range(0)));
  const auto mean = pofd::llk_mean(data, data.grid, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(pofd::llk_covariance(data, mean, 0.1));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Covariance)->RangeMultiplier(2)->Range(50, 400)->Complexity()->Unit(benchmark::kMillisecond);

void BM_Eigen(benchmark::State& state) {
  const pofd::DomainGrid grid(0.0, 1.0, static_cast<std::size_t>(state.range(0)));
  const auto cov = pofd::CovarianceEstimate::from_function(
      grid, [](double u, double v) { return std::min(u, v); });
  const pofd::Subdomain O({{0.0, 0.6}}, grid);
  for (auto _ : state) benchmark::DoNotOptimize(pofd::analyse_subdomain(cov, O));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Eigen)->RangeMultiplier(2)->Range(51, 408)->Complexity(benchmark::oNCubed);

void BM_Fit(benchmark::State& state) {
  const auto data = sample(100);
  for (auto _ : state) benchmark::DoNotOptimize(pofd::ReconstructionModel::fit(data));
}
BENCHMARK(BM_Fit)->Unit(benchmark::kMillisecond);

}  // namespace
