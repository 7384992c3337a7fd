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

// Wall-clock profiling of decoder blocks and of the upsampling operators.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbovaed/decoder.hpp"
#include "turbovaed/decoder_config.hpp"
#include "turbovaed/tensor.hpp"
#include "turbovaed/upsample.hpp"
#include "turbovaed/weights_io.hpp"

namespace turbovaed {

struct TimingStats {
  double mean_ns = 0.0;
  double median_ns = 0.0;
  double p95_ns = 0.0;
  double min_ns = 0.0;
  double max_ns = 0.0;
};

// Nearest-rank percentiles over raw samples. Throws DomainError if empty.
TimingStats summarize_samples(std::vector<double> samples_ns);

struct ProfileOptions {
  int warmup = 5;
  int repeats = 20;
  int threads = 1;
  std::uint64_t seed = 0;  // latent contents
  void validate() const;   // warmup >= 1, repeats >= 3, threads >= 1
};

struct BlockTiming {
  std::string name;
  TimingStats stats;
  double share_percent = 0.0;  // of the summed block means
};

struct BlockTimingReport {
  std::string label;
  Shape5 latent_shape{};
  Shape5 output_shape{};
  std::vector<BlockTiming> blocks;
  TimingStats end_to_end;
  double instrumented_ns = 0.0;  // sum of block means
  double fps = 0.0;              // output frames / mean end-to-end seconds
  int warmup = 0;
  int repeats = 0;
  int threads = 0;

  // |instrumented - end_to_end.mean| / end_to_end.mean
  double instrumentation_gap() const;
  std::string to_csv() const;
  std::string to_text() const;
  std::string to_json() const;
};

template <typename T>
BlockTimingReport profile_decoder(const Decoder<T>& decoder, const Shape5& latent_shape, const ProfileOptions& opt);

BlockTimingReport profile_decoder(const DecoderConfig& cfg, const WeightStore& weights, const Shape5& latent_shape,
                                  const ProfileOptions& opt);

struct UpsamplerTiming {
  std::string op;  // pixel_shuffle_3d, decoupled_upsample, interpolate_nearest, interpolate_trilinear
  Shape5 input_shape{};
  Shape5 output_shape{};
  UpsampleFactors factors;
  TimingStats stats;
};

struct UpsamplerBench {
  std::vector<UpsamplerTiming> rows;
  int warmup = 0;
  int repeats = 0;
  int threads = 0;

  // Finds the row for (op, input shape, factors); throws ConfigError if absent.
  const UpsamplerTiming& row(const std::string& op, const Shape5& input_shape, const UpsampleFactors& f) const;
  std::string to_csv() const;
  std::string to_text() const;
  std::string to_json() const;
};

// `shapes` are shuffle-family inputs (N, r_t r_s^2 C, T, H, W). The
// interpolation rows run on (N, C, T, H, W) so every row writes the same
// output shape.
UpsamplerBench bench_upsamplers(const std::vector<Shape5>& shapes, const std::vector<UpsampleFactors>& factors,
                                const ProfileOptions& opt);

}  // namespace turbovaed
