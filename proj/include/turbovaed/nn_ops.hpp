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

// Convolution, normalization and activation operators with their exact
// reverse-mode derivatives. All kernels run at stride 1 with "same" output
// extents; parallel loops partition over independent outputs, so results are
// bitwise identical for any OpenMP thread count.

#pragma once

#include <cstdint>
#include <vector>

#include "turbovaed/tensor.hpp"

namespace turbovaed {

enum class TemporalPadding {
  // Pad k_t - 1 frames on the past side only, replicating frame 0.
  causal_replicate,
  // Pad k_t / 2 zero frames on each side.
  zero,
};

const char* to_string(TemporalPadding p);
TemporalPadding parse_temporal_padding(const std::string& s);

template <typename T>
struct Conv3dParams {
  Tensor<T> weight;     // (C_out, C_in, k_t, k_h, k_w)
  std::vector<T> bias;  // empty or C_out
  TemporalPadding temporal = TemporalPadding::causal_replicate;

  std::int64_t c_out() const { return weight.dim(0); }
  std::int64_t c_in() const { return weight.dim(1); }
  void validate() const;
};

template <typename T>
struct DwSepConv3dParams {
  Tensor<T> depthwise;            // (C_in, 1, k_t, k_h, k_w)
  std::vector<T> depthwise_bias;  // empty or C_in
  Tensor<T> pointwise;            // (C_out, C_in, 1, 1, 1)
  std::vector<T> pointwise_bias;  // empty or C_out
  TemporalPadding temporal = TemporalPadding::causal_replicate;

  std::int64_t c_in() const { return depthwise.dim(0); }
  std::int64_t c_out() const { return pointwise.dim(0); }
  void validate() const;
};

template <typename T>
struct GroupNormParams {
  std::int64_t num_groups = 32;
  std::vector<T> gamma;
  std::vector<T> beta;
  double epsilon = 1e-6;

  void validate(std::int64_t channels) const;
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  std::vector<T> bias;
};

template <typename T>
struct DwSepGrads {
  Tensor<T> input;
  Tensor<T> depthwise;
  std::vector<T> depthwise_bias;
  Tensor<T> pointwise;
  std::vector<T> pointwise_bias;
};

template <typename T>
struct GroupNormGrads {
  Tensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Conv3dParams<T>& p);
template <typename T>
ConvGrads<T> conv3d_grad(const Tensor<T>& x, const Conv3dParams<T>& p, const Tensor<T>& upstream);

// Depthwise stage alone: channel m of the output reads only channel m.
template <typename T>
Tensor<T> depthwise_conv3d(const Tensor<T>& x, const DwSepConv3dParams<T>& p);
// 1x1x1 channel mixing; weight is (C_out, C_in, 1, 1, 1).
template <typename T>
Tensor<T> pointwise_conv3d(const Tensor<T>& x, const Tensor<T>& weight, const std::vector<T>& bias);
template <typename T>
ConvGrads<T> pointwise_conv3d_grad(const Tensor<T>& x, const Tensor<T>& weight, const std::vector<T>& bias,
                                   const Tensor<T>& upstream);

template <typename T>
Tensor<T> dwsep_conv3d(const Tensor<T>& x, const DwSepConv3dParams<T>& p);
template <typename T>
DwSepGrads<T> dwsep_conv3d_grad(const Tensor<T>& x, const DwSepConv3dParams<T>& p, const Tensor<T>& upstream);

// Full kernel equivalent to a depthwise separable layer:
// K[n, m, ...] = pointwise[n, m] * depthwise[m, ...], with the depthwise bias
// folded into the pointwise bias.
template <typename T>
Conv3dParams<T> factorized_full_kernel(const DwSepConv3dParams<T>& p);

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const GroupNormParams<T>& p);
template <typename T>
GroupNormGrads<T> group_norm_grad(const Tensor<T>& x, const GroupNormParams<T>& p, const Tensor<T>& upstream);

// SiLU, x * sigmoid(x).
template <typename T>
Tensor<T> silu(const Tensor<T>& x);
template <typename T>
Tensor<T> silu_grad(const Tensor<T>& x, const Tensor<T>& upstream);

// Closed-form parameter counts.
std::int64_t conv3d_param_count(std::int64_t c_in, std::int64_t c_out, std::int64_t k_t, std::int64_t k_h,
                                std::int64_t k_w, bool bias);
std::int64_t dwsep_param_count(std::int64_t c_in, std::int64_t c_out, std::int64_t k_t, std::int64_t k_h,
                               std::int64_t k_w, bool bias);

}  // namespace turbovaed
