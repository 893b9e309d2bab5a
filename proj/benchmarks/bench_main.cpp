#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include <random>

#include "unoranic/augment.hpp"
#include "unoranic/metrics.hpp"
#include "unoranic/model.hpp"
#include "unoranic/train.hpp"

using namespace unoranic;

namespace {

data::DatasetSplits bench_data(std::size_t n) {
  data::SyntheticSpec spec;
  spec.train_count = n;
  spec.val_count = 2;
  spec.test_count = 2;
  return data::generate_synthetic(spec);
}

void BM_EncoderForward(benchmark::State& state) {
  torch::set_num_threads(1);
  auto b = model::init_model(model::ArchConfig{}, 1);
  b.set_mode(model::Mode::eval);
  torch::NoGradGuard ng;
  const auto x = torch::rand({state.range(0), 1, 28, 28});
  for (auto _ : state) benchmark::DoNotOptimize(model::encode_anatomy(b, x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  torch::set_num_threads(1);
  train::TrainConfig cfg;
  cfg.arch.base_channels = static_cast<int>(state.range(0));
  cfg.model_kind = state.range(1) ? model::ModelKind::unoranic : model::ModelKind::vanilla_ae;
  auto st = train::start_training(cfg);
  const auto d = bench_data(64);
  data::IndexBatch idx(64);
  for (std::size_t i = 0; i < 64; ++i) idx[i] = i;
  const auto batch = train::gather(d.train, idx, 1);
  for (auto _ : state) benchmark::DoNotOptimize(train::train_step(st.bundle, batch, cfg, st.optimizer, 1e-4));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStep)->Args({16, 1})->Args({16, 0})->Args({32, 1})->Unit(benchmark::kMillisecond);

void BM_ApplyCorruption(benchmark::State& state) {
  const auto kind = static_cast<augment::CorruptionKind>(state.range(0));
  const auto img = bench_data(1).train.samples[0];
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(augment::apply_corruption(img, {kind, 3, ++seed}));
  state.SetLabel(std::string(augment::to_string(kind)));
}
BENCHMARK(BM_ApplyCorruption)->DenseRange(1, static_cast<int>(augment::CorruptionKind::pixelate));

void BM_RocAuc(benchmark::State& state) {
  std::mt19937 gen(1);
  std::uniform_real_distribution<double> u;
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  std::vector<std::int64_t> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = u(gen);
    y[i] = static_cast<std::int64_t>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(eval::roc_auc(s, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RocAuc)->RangeMultiplier(10)->Range(100, 100000)->Complexity(benchmark::oNLogN);

}  // namespace
BENCHMARK_MAIN();
