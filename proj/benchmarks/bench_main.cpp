#include <benchmark/benchmark.h>

#include <random>

#include "hicd/correlation.hpp"
#include "hicd/degradation.hpp"
#include "hicd/distillation.hpp"
#include "hicd/ops.hpp"
#include "hicd/training.hpp"

namespace {

hicd::Tensor random_tensor(hicd::Shape shape, std::uint64_t seed, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  std::vector<double> v(hicd::shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return hicd::Tensor(std::move(shape), std::move(v), grad);
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  hicd::Tensor x = random_tensor({4, 64, 64, c}, 1, true);
  hicd::Tensor k = random_tensor({3, 3, c, c}, 2, true);
  for (auto _ : state) {
    hicd::backward(hicd::sum(hicd::conv2d(x, k, {1, 1})));
    x.zero_grad();
    k.zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * 4 * 64 * 64 * 9 * static_cast<std::int64_t>(c * c));
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_CorSelf(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const hicd::FeatureMap f(random_tensor({side, side, 64}, 3));
  for (auto _ : state) benchmark::DoNotOptimize(hicd::cor_self(f));
}
BENCHMARK(BM_CorSelf)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

void BM_LossGlobal(benchmark::State& state) {
  const auto kq = static_cast<std::size_t>(state.range(0));
  hicd::Tensor s1 = random_tensor({16, 16, 64}, 4, true), s2 = random_tensor({16, 16, 64}, 5, true);
  const hicd::Tensor t1 = random_tensor({16, 16, 64}, 6), t2 = random_tensor({16, 16, 64}, 7);
  const hicd::Tensor bank = random_tensor({kq, 64}, 8);
  for (auto _ : state) {
    hicd::backward(hicd::loss_global(hicd::FeatureMap(s1), hicd::FeatureMap(s2), hicd::FeatureMap(t1),
                                     hicd::FeatureMap(t2), bank));
    s1.zero_grad();
    s2.zero_grad();
  }
}
BENCHMARK(BM_LossGlobal)->Arg(512)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_Degrade(benchmark::State& state) {
  std::mt19937_64 rng(9);
  hicd::Image img(64, 64, 3);
  for (auto& v : img.pixels) v = std::uniform_real_distribution<double>(0, 1)(rng);
  for (auto _ : state) {
    const auto spec = hicd::sample_spec(rng, 8);
    benchmark::DoNotOptimize(hicd::upsample_to(hicd::degrade(img, spec), 64, 64));
  }
}
BENCHMARK(BM_Degrade)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const bool distill = state.range(0) != 0;
  hicd::SyntheticSceneSpec scenes;
  const auto data = hicd::generate_synthetic_set(scenes, 8);
  hicd::TrainConfig cfg;
  cfg.total_steps = 1;
  cfg.scale = 8;
  cfg.bank.sample_count = 512;
  cfg.bank.capacity = 4096;
  std::mt19937_64 init(1);
  const hicd::ChangeDetector teacher(hicd::ModelConfig{}, init);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hicd::train_student(data, distill ? &teacher : nullptr, hicd::ModelConfig{}, cfg));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
