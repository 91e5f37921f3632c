#include <benchmark/benchmark.h>

#include "proxgate/eval.hpp"
#include "proxgate/ml.hpp"
#include "proxgate/registry.hpp"
#include "proxgate/signal.hpp"

using namespace proxgate;

namespace {

signal::LabeledDataset bench_dataset(std::size_t n, double sigma) {
  signal::PathLossParams params;
  params.shadowing_sigma_db = sigma;
  params.rng_seed = 1;
  return signal::synth_dataset(n, signal::default_distance_grid(), 2.0, params);
}

void BM_DeriveSignature(benchmark::State& state) {
  registry::SecretKey secret{};
  secret.fill(0x17);
  registry::DeviceIdentifiers ids;
  ids.uuid = "bench-device-uuid";
  ids.imei = "356938035643809";
  for (auto _ : state) {
    benchmark::DoNotOptimize(registry::derive_signature(ids, secret));
  }
}
BENCHMARK(BM_DeriveSignature);

void BM_SynthRssi(benchmark::State& state) {
  signal::PathLossParams params;
  signal::Rng rng(7);
  double d = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(signal::synth_rssi(d, params, rng));
    d = d >= 5.0 ? 0.5 : d + 0.5;
  }
}
BENCHMARK(BM_SynthRssi);

void BM_SynthDataset10k(benchmark::State& state) {
  auto grid = signal::default_distance_grid();
  signal::PathLossParams params;
  params.rng_seed = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(signal::synth_dataset(10000, grid, 2.0, params));
  }
}
BENCHMARK(BM_SynthDataset10k);

void BM_TrainLogistic(benchmark::State& state) {
  auto ds = bench_dataset(static_cast<std::size_t>(state.range(0)), 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ml::train_logistic(ds));
  }
}
BENCHMARK(BM_TrainLogistic)->Arg(1000)->Arg(8000);

void BM_PredictKnn(benchmark::State& state) {
  auto ds = bench_dataset(static_cast<std::size_t>(state.range(0)), 3.0);
  auto model = ml::train_knn(ds, 5);
  std::array<double, 2> query{-60.0, -62.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ml::predict(model, query));
  }
}
BENCHMARK(BM_PredictKnn)->Arg(1000)->Arg(8000);

void BM_PredictGnb(benchmark::State& state) {
  auto ds = bench_dataset(2000, 3.0);
  auto model = ml::train_gnb(ds);
  std::array<double, 2> query{-60.0, -62.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ml::predict(model, query));
  }
}
BENCHMARK(BM_PredictGnb);

void BM_ConfusionMetrics(benchmark::State& state) {
  eval::ConfusionMatrix cm{881, 874, 27, 18};
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::accuracy_pct(cm));
    benchmark::DoNotOptimize(eval::sensitivity_pct(cm));
    benchmark::DoNotOptimize(eval::specificity_pct(cm));
    benchmark::DoNotOptimize(eval::precision_pct(cm));
  }
}
BENCHMARK(BM_ConfusionMetrics);

void BM_RunExperiment(benchmark::State& state) {
  auto crosswise = bench_dataset(2000, 3.0);
  auto direct = bench_dataset(2000, 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eval::run_experiment(crosswise, direct, 1, {}));
  }
}
BENCHMARK(BM_RunExperiment);

}  // namespace

BENCHMARK_MAIN();
