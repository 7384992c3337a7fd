// Copyright 2026 The turbovaed Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Parallel kernels against the serial reference implementations, plus the
// upsampler family at matched output shapes.
//
//   bench_kernels --benchmark_filter=Conv3d
//
// The second range argument of the parallel variants is the thread count.

#include <benchmark/benchmark.h>

#include <random>

#include "turbovaed/nn_ops.hpp"
#include "turbovaed/parallel.hpp"
#include "turbovaed/reference/reference_ops.hpp"
#include "turbovaed/upsample.hpp"

namespace {

using turbovaed::Tensor;

Tensor<float> random_tensor(const turbovaed::Shape5& shape, std::uint64_t seed) {
  Tensor<float> x(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  for (auto& v : x.data()) v = nd(rng);
  return x;
}

turbovaed::Conv3dParams<float> conv_params(std::int64_t channels) {
  turbovaed::Conv3dParams<float> p;
  p.weight = random_tensor({channels, channels, 3, 3, 3}, 1);
  p.bias.assign(static_cast<std::size_t>(channels), 0.0f);
  return p;
}

turbovaed::DwSepConv3dParams<float> dwsep_params(std::int64_t channels, std::int64_t k) {
  turbovaed::DwSepConv3dParams<float> p;
  p.depthwise = random_tensor({channels, 1, k, k, k}, 2);
  p.pointwise = random_tensor({channels, channels, 1, 1, 1}, 3);
  return p;
}

turbovaed::GroupNormParams<float> norm_params(std::int64_t channels) {
  turbovaed::GroupNormParams<float> p;
  p.num_groups = 8;
  p.gamma.assign(static_cast<std::size_t>(channels), 1.0f);
  p.beta.assign(static_cast<std::size_t>(channels), 0.0f);
  return p;
}

constexpr std::int64_t kChannels = 32;
const turbovaed::Shape5 kInput{1, kChannels, 5, 32, 32};

void Conv3dSerial(benchmark::State& state) {
  const auto x = random_tensor(kInput, 4);
  const auto p = conv_params(kChannels);
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::reference::conv3d(x, p));
}
BENCHMARK(Conv3dSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

void Conv3dParallel(benchmark::State& state) {
  turbovaed::parallel::ScopedThreads threads(static_cast<int>(state.range(0)));
  const auto x = random_tensor(kInput, 4);
  const auto p = conv_params(kChannels);
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::conv3d(x, p));
}
BENCHMARK(Conv3dParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void DwSepSerial(benchmark::State& state) {
  const auto x = random_tensor(kInput, 5);
  const auto p = dwsep_params(kChannels, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::reference::dwsep_conv3d(x, p));
}
BENCHMARK(DwSepSerial)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond)->UseRealTime();

void DwSepParallel(benchmark::State& state) {
  turbovaed::parallel::ScopedThreads threads(static_cast<int>(state.range(1)));
  const auto x = random_tensor(kInput, 5);
  const auto p = dwsep_params(kChannels, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::dwsep_conv3d(x, p));
}
BENCHMARK(DwSepParallel)->ArgsProduct({{3, 5}, {1, 2, 4}})->Unit(benchmark::kMillisecond)->UseRealTime();

void GroupNormSerial(benchmark::State& state) {
  const auto x = random_tensor(kInput, 6);
  const auto p = norm_params(kChannels);
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::reference::group_norm(x, p));
}
BENCHMARK(GroupNormSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

void GroupNormParallel(benchmark::State& state) {
  turbovaed::parallel::ScopedThreads threads(static_cast<int>(state.range(0)));
  const auto x = random_tensor(kInput, 6);
  const auto p = norm_params(kChannels);
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::group_norm(x, p));
}
BENCHMARK(GroupNormParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

// Upsamplers: 3D shuffle and the decoupled form read C * 16 channels, the
// interpolations read C channels. Every variant writes the same output.
const turbovaed::UpsampleFactors kFactors{2, 2};
const turbovaed::Shape5 kWide{1, kChannels * 8, 3, 16, 16};
const turbovaed::Shape5 kNarrow{1, kChannels, 3, 16, 16};

void PixelShuffle3dSerial(benchmark::State& state) {
  const auto x = random_tensor(kWide, 7);
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::reference::pixel_shuffle_3d(x, 2, 2));
}
BENCHMARK(PixelShuffle3dSerial)->Unit(benchmark::kMillisecond)->UseRealTime();

void PixelShuffle3d(benchmark::State& state) {
  turbovaed::parallel::ScopedThreads threads(static_cast<int>(state.range(0)));
  const auto x = random_tensor(kWide, 7);
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::pixel_shuffle_3d(x, 2, 2));
}
BENCHMARK(PixelShuffle3d)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void DecoupledUpsample(benchmark::State& state) {
  turbovaed::parallel::ScopedThreads threads(static_cast<int>(state.range(0)));
  const auto x = random_tensor(kWide, 8);
  for (auto _ : state) benchmark::DoNotOptimize(turbovaed::decoupled_upsample(x, kFactors));
}
BENCHMARK(DecoupledUpsample)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void InterpolateNearest(benchmark::State& state) {
  turbovaed::parallel::ScopedThreads threads(static_cast<int>(state.range(0)));
  const auto x = random_tensor(kNarrow, 9);
  for (auto _ : state)
    benchmark::DoNotOptimize(turbovaed::interpolate_3d(x, kFactors, turbovaed::InterpolationMode::nearest));
}
BENCHMARK(InterpolateNearest)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void InterpolateTrilinear(benchmark::State& state) {
  turbovaed::parallel::ScopedThreads threads(static_cast<int>(state.range(0)));
  const auto x = random_tensor(kNarrow, 9);
  for (auto _ : state)
    benchmark::DoNotOptimize(turbovaed::interpolate_3d(x, kFactors, turbovaed::InterpolationMode::trilinear));
}
BENCHMARK(InterpolateTrilinear)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
