#include <benchmark/benchmark.h>

#include "tsen/experiment.hpp"
#include "tsen/matrix.hpp"
#include "tsen/model.hpp"
#include "tsen/rng.hpp"

namespace {

tsen::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  tsen::Rng rng(seed);
  tsen::Matrix m(rows, cols);
  for (double& v : m.data()) v = tsen::uniform(rng, -1, 1);
  return m;
}

void BM_MatmulSerial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const tsen::Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(tsen::matmul_serial(a, b));
  state.SetComplexityN(state.range(0));
}

void BM_MatmulParallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const tsen::Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(tsen::matmul_parallel(a, b));
  state.SetComplexityN(state.range(0));
}

BENCHMARK(BM_MatmulSerial)->RangeMultiplier(2)->Range(16, 256);
BENCHMARK(BM_MatmulParallel)->RangeMultiplier(2)->Range(16, 256);

/// Small training job per (rep, method): one GRU baseline on a sine series.
tsen::ExperimentSpec training_spec() {
  tsen::ExperimentSpec spec;
  spec.rows = {"s"};
  spec.methods = {"a", "b", "c", "d"};
  spec.reps = 4;
  spec.master_seed = 1;
  spec.job = [](std::size_t, std::size_t, std::uint64_t seed) {
    tsen::Series s{"s", {}, {}};
    for (int t = 0; t < 80; ++t) s.target.push_back(std::sin(0.3 * t));
    tsen::TrainConfig c;
    c.lookback = 6;
    c.horizon = 1;
    c.epochs = 3;
    c.batch_size = 16;
    c.hidden_width = 8;
    c.depth = 1;
    c.seed = seed;
    const auto set = tsen::make_windows(s, c.lookback, c.horizon);
    const auto fit = tsen::train_baseline(set, tsen::EncoderKind::gru, c);
    const double loss = tsen::evaluate_loss(fit.params, set);
    return tsen::MethodScores{{loss}, {loss}};
  };
  return spec;
}

void BM_ExperimentSerial(benchmark::State& state) {
  const auto spec = training_spec();
  for (auto _ : state) benchmark::DoNotOptimize(tsen::repeated_experiment(spec, tsen::Execution::serial));
}

void BM_ExperimentParallel(benchmark::State& state) {
  const auto spec = training_spec();
  for (auto _ : state) benchmark::DoNotOptimize(tsen::repeated_experiment(spec, tsen::Execution::parallel));
}

BENCHMARK(BM_ExperimentSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExperimentParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
