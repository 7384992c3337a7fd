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

// Declarative description of the decoder graph and everything derivable from
// it without touching weights: the layer layout, parameter names and shapes,
// parameter counts, shape laws and the depthwise-separable redundancy sweep.
//
// Graph, in order:
//   mid   conv_in (latent -> width), then resblocks
//   up_i  [upsample_conv (C_prev -> r_t r_s^2 C), upsample, drop r_t - 1
//          leading frames], then resblocks
//   head  GroupNorm -> SiLU -> conv to out_channels * r^2 -> 2D pixel shuffle

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "turbovaed/nn_ops.hpp"
#include "turbovaed/tensor.hpp"
#include "turbovaed/upsample.hpp"

namespace turbovaed {

enum class ConvKind { standard, dwsep };
enum class UpsampleMode { decoupled, pixel_shuffle_3d };

const char* to_string(ConvKind k);
const char* to_string(UpsampleMode m);

struct BlockConfig {
  std::string name;
  std::int64_t channels = 0;
  std::int64_t num_resblocks = 1;
  UpsampleFactors upsample;
  ConvKind conv_kind = ConvKind::standard;
  std::int64_t kernel_size = 3;        // standard convs
  std::int64_t dwsep_kernel_size = 5;  // depthwise stage of dwsep convs

  std::int64_t active_kernel() const { return conv_kind == ConvKind::dwsep ? dwsep_kernel_size : kernel_size; }
};

struct HeadConfig {
  std::int64_t upsample_spatial = 1;
  std::int64_t kernel_size = 3;
};

struct DecoderConfig {
  std::int64_t latent_channels = 128;
  std::int64_t out_channels = 3;
  std::int64_t norm_groups = 32;
  double norm_eps = 1e-6;
  TemporalPadding temporal_padding = TemporalPadding::causal_replicate;
  UpsampleMode upsample_mode = UpsampleMode::decoupled;
  std::vector<BlockConfig> blocks;  // mid first, then up_0, up_1, ...
  HeadConfig head;

  // (d_t, d_h, d_w): products of the per-block factors (head included).
  std::array<std::int64_t, 3> factors() const;
  // Block names including the trailing "head".
  std::vector<std::string> block_names() const;
  void validate() const;

  const BlockConfig& block(const std::string& name) const;
  BlockConfig& block(const std::string& name);
};

// (C, T_l, H_l, W_l) latent for a (T + 1)-frame, H x W video:
// T_l = T / d_t + 1, H_l = H / d_h, W_l = W / d_w.
struct LatentSpec {
  std::int64_t channels = 0;
  std::int64_t frames = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;

  Shape5 shape(std::int64_t batch = 1) const { return {batch, channels, frames, height, width}; }
};

LatentSpec latent_spec_for_video(const DecoderConfig& cfg, std::int64_t video_frames, std::int64_t height,
                                 std::int64_t width);
// Video shape (N, out, d_t (T_l - 1) + 1, d_h H_l, d_w W_l); throws ShapeError
// if the latent does not fit the config.
Shape5 video_shape_for_latent(const DecoderConfig& cfg, const Shape5& latent);
// Output shape of each block's post-block feature, keyed like block_names().
std::vector<std::pair<std::string, Shape5>> feature_shapes(const DecoderConfig& cfg, const Shape5& latent);

// Built-in configurations for the three supported compression triples.
DecoderConfig default_config(std::int64_t d_t, std::int64_t d_h, std::int64_t d_w);
// Same graph with every block width divided by `divisor`.
DecoderConfig with_scaled_widths(DecoderConfig cfg, std::int64_t divisor, std::int64_t norm_groups);

DecoderConfig parse_config_json(const std::string& text);
DecoderConfig load_config(const std::string& path);
std::string config_to_json(const DecoderConfig& cfg, int indent = 2);
// Applies "a.b.c=value" overrides to the JSON form before parsing. Array
// elements under "blocks" are addressed by block name (blocks.mid.channels=64).
DecoderConfig apply_overrides(const DecoderConfig& cfg, const std::vector<std::string>& overrides);

// ---- Layer layout ---------------------------------------------------------

struct ConvSpec {
  std::string name;  // parameter prefix, e.g. "up_1/res0/conv1"
  ConvKind kind = ConvKind::standard;
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  std::int64_t kernel = 3;
  bool pointwise_only = false;  // 1x1x1 standard conv (skip/projection)
};

struct NormSpec {
  std::string name;
  std::int64_t channels = 0;
};

struct ResBlockSpec {
  std::string name;
  NormSpec norm1;
  ConvSpec conv1;
  NormSpec norm2;
  ConvSpec conv2;
  std::optional<ConvSpec> skip;
};

struct BlockLayout {
  std::string name;
  std::optional<ConvSpec> entry_conv;  // conv_in (mid) or upsample_conv (up_i)
  UpsampleFactors upsample;
  std::vector<ResBlockSpec> resblocks;
  std::optional<NormSpec> head_norm;
  std::optional<ConvSpec> head_conv;
  std::int64_t out_channels = 0;
};

std::vector<BlockLayout> make_layout(const DecoderConfig& cfg);

struct ParamSpec {
  std::string name;
  std::vector<std::int64_t> shape;
  std::int64_t numel() const;
};

std::vector<ParamSpec> param_specs(const ConvSpec& conv);
std::vector<ParamSpec> param_specs(const NormSpec& norm);
std::vector<ParamSpec> param_specs(const DecoderConfig& cfg);

struct ParamCount {
  std::vector<std::pair<std::string, std::int64_t>> per_block;
  std::int64_t total = 0;
};

ParamCount count_params(const DecoderConfig& cfg);

struct SweepVariant {
  std::string replaced_upto;  // "none" for the all-standard baseline
  DecoderConfig config;
  ParamCount params;
};

// Baseline (all standard) followed by one variant per prefix mid, mid+up_0, ...
// ending at `replace_upto`.
std::vector<SweepVariant> redundancy_sweep(const DecoderConfig& cfg, const std::string& replace_upto);

}  // namespace turbovaed
