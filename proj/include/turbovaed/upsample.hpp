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

// Video upsamplers. Every shuffle-family op maps
//   (N, r_t * r_s^2 * C, T, H, W) -> (N, C, r_t * T, r_s * H, r_s * W)
// as a pure element permutation; each has an exact inverse, which is also its
// gradient.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "turbovaed/tensor.hpp"

namespace turbovaed {

struct UpsampleFactors {
  std::int64_t r_t = 1;
  std::int64_t r_s = 1;

  std::int64_t channel_multiplier() const { return r_t * r_s * r_s; }
  void validate() const;
  friend bool operator==(const UpsampleFactors&, const UpsampleFactors&) = default;
};

enum class InterpolationMode { nearest, trilinear };

// Reference 3D pixel shuffle. Input channel index decomposes as
// ((c * r_t + dt) * r_s + dh) * r_s + dw, with dt slowest.
template <typename T>
Tensor<T> pixel_shuffle_3d(const Tensor<T>& x, std::int64_t r_t, std::int64_t r_s);
template <typename T>
Tensor<T> pixel_unshuffle_3d(const Tensor<T>& y, std::int64_t r_t, std::int64_t r_s);

// out[n, c', r_t*t + j, h, w] = x[n, j*C' + c', t, h, w].
template <typename T>
Tensor<T> channel_to_time(const Tensor<T>& x, std::int64_t r_t);
template <typename T>
Tensor<T> time_to_channel(const Tensor<T>& y, std::int64_t r_t);

// Framewise 2D pixel shuffle:
// Y[c, t, h, w] = F[C*r*(w mod r) + C*(h mod r) + c, t, h / r, w / r].
template <typename T>
Tensor<T> pixel_shuffle_2d_video(const Tensor<T>& x, std::int64_t r_s);
template <typename T>
Tensor<T> pixel_unshuffle_2d_video(const Tensor<T>& y, std::int64_t r_s);

// channel_to_time followed by pixel_shuffle_2d_video, evaluated as a single
// gather pass.
template <typename T>
Tensor<T> decoupled_upsample(const Tensor<T>& x, const UpsampleFactors& f);
template <typename T>
Tensor<T> decoupled_downsample(const Tensor<T>& y, const UpsampleFactors& f);

// The same composition executed literally as two rearrangement passes.
template <typename T>
Tensor<T> decoupled_upsample_two_step(const Tensor<T>& x, const UpsampleFactors& f);

// out[:, k] = x[:, perm[k]].
template <typename T>
Tensor<T> permute_channels(const Tensor<T>& x, const std::vector<std::int64_t>& perm);

// Trilinear uses half-pixel (align_corners = false) sampling, clamped at the
// borders.
template <typename T>
Tensor<T> interpolate_3d(const Tensor<T>& x, const UpsampleFactors& f, InterpolationMode mode);
template <typename T>
Tensor<T> interpolate_3d_grad(const Shape5& input_shape, const UpsampleFactors& f, InterpolationMode mode,
                              const Tensor<T>& upstream);

// Output shape of any upsampler for an input of `in` (channels already
// divided by the multiplier for the shuffle family).
Shape5 upsampled_shape(const Shape5& in, const UpsampleFactors& f, bool shuffle_family);

}  // namespace turbovaed
