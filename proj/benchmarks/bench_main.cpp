// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "viptt/layers.hpp"
#include "viptt/lstm.hpp"
#include "viptt/model.hpp"
#include "viptt/preprocess.hpp"
#include "viptt/random.hpp"

namespace {

viptt::Tensor random_tensor(viptt::Shape shape, std::uint64_t seed) {
  viptt::Tensor t(std::move(shape));
  viptt::SplitMix64 rng(seed);
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_SizResize(benchmark::State& state) {
  const auto order = state.range(0) == 3 ? viptt::SplineOrder::Cubic : viptt::SplineOrder::Linear;
  viptt::Volume v(40, 64, 64, viptt::ValueDomain::UnitNormalized);
  viptt::SplitMix64 rng(1);
  for (double& x : v.data) x = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(viptt::siz_resize(v, {16, 48, 48, order}));
  state.SetItemsProcessed(state.iterations() * 16 * 48 * 48);
}
BENCHMARK(BM_SizResize)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  viptt::Conv2d conv(channels, channels, 3, viptt::Padding::Same);
  viptt::SplitMix64 rng(2);
  conv.init_glorot(rng);
  const auto x = random_tensor({8, channels, 32, 32}, 3);
  for (auto _ : state) {
    const auto y = conv.forward(x, true);
    benchmark::DoNotOptimize(conv.backward(y));
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_LstmForwardBackward(benchmark::State& state) {
  const auto units = static_cast<std::size_t>(state.range(0));
  viptt::Lstm lstm(64, units);
  viptt::SplitMix64 rng(4);
  lstm.init(rng);
  const auto x = random_tensor({2, 70, 64}, 5);
  for (auto _ : state) {
    const auto h = lstm.forward(x, true);
    benchmark::DoNotOptimize(lstm.backward(h));
  }
}
BENCHMARK(BM_LstmForwardBackward)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state) {
  viptt::ModelConfig cfg;
  cfg.depth = 8;
  cfg.height = 32;
  cfg.width = 32;
  cfg.feature_dim = 16;
  cfg.lstm_units = 16;
  cfg.dense_units = 64;
  cfg.num_classes = 5;
  auto model = viptt::Model::build(cfg, 6);
  const auto x = random_tensor({2, 8, 32, 32}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, false));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
