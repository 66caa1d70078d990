#include <benchmark/benchmark.h>

#include "pofd/iterative.hpp"
#include "pofd/simulation.hpp"

namespace {

struct Scene {
  pofd::DgpSample sample;
  pofd::ReconstructionModel model;

  explicit Scene(int dgp)
      : sample(pofd::generate_dgp(config(dgp), 0)), model(pofd::ReconstructionModel::fit(sample.data)) {}

  static pofd::DgpConfig config(int dgp) {
    pofd::DgpConfig c;
    c.dgp = dgp;
    c.n = 100;
    c.n_targets = 10;
    return c;
  }
};

const Scene& scene(int dgp) {
  static const Scene one(1);
  static const Scene three(3);
  return dgp == 1 ? one : three;
}

void BM_Reconstruct(benchmark::State& state) {
  const auto method = static_cast<pofd::Method>(state.range(0));
  const auto& s = scene(method == pofd::Method::kraus ? 3 : 1);
  const pofd::TruncationPolicy policy{pofd::TruncationKind::fixed, 3};
  pofd::TruncationSelector selector(s.model, s.sample.data, policy);
  std::size_t l = 0;
  for (auto _ : state) {
    const auto& t = s.sample.targets[l++ % s.sample.targets.size()];
    benchmark::DoNotOptimize(pofd::reconstruct_with(
        pofd::CurveInput::from_curve(t.observed, s.model.grid()), s.model, method, selector));
  }
  state.SetLabel(pofd::to_string(method));
}
BENCHMARK(BM_Reconstruct)->DenseRange(0, 5)->Unit(benchmark::kMicrosecond);

void BM_TruncationGcv(benchmark::State& state) {
  const auto& s = scene(1);
  const auto& t = s.sample.targets.front();
  const auto O = pofd::CurveInput::from_curve(t.observed, s.model.grid()).observed;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        pofd::select_truncation_gcv(pofd::Method::ayes, s.model, s.sample.data, O));
  }
}
BENCHMARK(BM_TruncationGcv)->Unit(benchmark::kMillisecond);

void BM_Iterative(benchmark::State& state) {
  pofd::DgpConfig c = Scene::config(4);
  const auto sample = pofd::generate_dgp(c, 0);
  const auto model = pofd::ReconstructionModel::fit(sample.data);
  pofd::TruncationSelector selector(model, sample.data,
                                    {pofd::TruncationKind::fixed, 2});
  for (auto _ : state) {
    benchmark::DoNotOptimize(pofd::iterative_reconstruct(sample.targets.front().observed, model,
                                                         pofd::Method::ayes, selector));
  }
}
BENCHMARK(BM_Iterative)->Unit(benchmark::kMillisecond);

void BM_StudyReplication(benchmark::State& state) {
  pofd::DgpConfig c = Scene::config(1);
  c.replications = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pofd::run_study(c, {pofd::Method::ayes, pofd::Method::pace}));
  }
}
BENCHMARK(BM_StudyReplication)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
