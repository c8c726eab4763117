#include "nasbba/bba.hpp"
#include "nasbba/genome.hpp"
#include "nasbba/neuro.hpp"
#include "nasbba/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace nasbba;

namespace {

const data::FramedDataset& sine_windows(std::size_t t)
{
  static std::map<std::size_t, data::FramedDataset> cache;
  auto it = cache.find(t);
  if (it == cache.end())
    it = cache.emplace(t, data::frame(synthetic::sine_series(300, 25.0), t)).first;
  return it->second;
}

neuro::Network m4_like(std::size_t units)
{
  return neuro::Network::build(
    make_five_layer_spec(24, units, units, 9, 33, Activation::relu, Activation::relu), 1, 1);
}

void BM_Predict(benchmark::State& state)
{
  const auto net = m4_like(std::size_t(state.range(0)));
  const auto& windows = sine_windows(24);
  for (auto _ : state)
    benchmark::DoNotOptimize(neuro::predict(net, windows));
  state.SetItemsProcessed(state.iterations() * std::int64_t(windows.samples));
}
BENCHMARK(BM_Predict)->Arg(8)->Arg(25);

void BM_LossAndGradient(benchmark::State& state)
{
  const auto net = m4_like(std::size_t(state.range(0)));
  const auto& windows = sine_windows(24);
  std::vector<double> grad;
  for (auto _ : state)
    benchmark::DoNotOptimize(neuro::loss_and_gradient(net, windows, 0.01, grad));
  state.SetItemsProcessed(state.iterations() * std::int64_t(windows.samples));
}
BENCHMARK(BM_LossAndGradient)->Arg(8)->Arg(25);

void BM_TrainEpoch(benchmark::State& state)
{
  const auto net = m4_like(25);
  const auto& windows = sine_windows(24);
  neuro::TrainConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(neuro::train(net, windows, cfg));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_BbaOneMaxRun(benchmark::State& state)
{
  bba::BbaConfig cfg;
  cfg.population_size = std::size_t(state.range(0));
  cfg.iterations = 100;
  for (auto _ : state) {
    auto r = bba::run(cfg, 32, [](const BitVector& b, const bba::EvalContext&) {
      return double(b.size() - b.count_ones());
    });
    benchmark::DoNotOptimize(r.best_fitness);
  }
}
BENCHMARK(BM_BbaOneMaxRun)->Arg(10)->Arg(30);

void BM_GenomeDecode(benchmark::State& state)
{
  const auto g = BitVector::parse("11111101011111000110111000110100");
  for (auto _ : state)
    benchmark::DoNotOptimize(genome::decode(g));
}
BENCHMARK(BM_GenomeDecode);

void BM_GrayRoundTrip(benchmark::State& state)
{
  std::uint64_t n = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(genome::gray_decode(genome::gray_encode(n & 63U, 6)));
    ++n;
  }
}
BENCHMARK(BM_GrayRoundTrip);

} // namespace

BENCHMARK_MAIN();
