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

// Serial, index-by-index implementations written straight from the operator
// definitions. They share no code with the optimized kernels and serve as test
// oracles and as the baseline in bench_kernels.

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "turbovaed/nn_ops.hpp"
#include "turbovaed/tensor.hpp"

namespace turbovaed::reference {

// Value of x at padded coordinates, or 0 if the coordinate falls in a zero pad.
template <typename T>
T padded_at(const Tensor<T>& x, std::int64_t n, std::int64_t c, std::int64_t t, std::int64_t h, std::int64_t w,
            TemporalPadding temporal);

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Conv3dParams<T>& p);

template <typename T>
Tensor<T> depthwise_conv3d(const Tensor<T>& x, const DwSepConv3dParams<T>& p);

template <typename T>
Tensor<T> dwsep_conv3d(const Tensor<T>& x, const DwSepConv3dParams<T>& p);

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const GroupNormParams<T>& p);

template <typename T>
Tensor<T> silu(const Tensor<T>& x);

// out[n, c, r_t t + dt, r_s h + dh, r_s w + dw] = x[n, ((c r_t + dt) r_s + dh) r_s + dw, t, h, w]
template <typename T>
Tensor<T> pixel_shuffle_3d(const Tensor<T>& x, std::int64_t r_t, std::int64_t r_s);

template <typename T>
Tensor<T> channel_to_time(const Tensor<T>& x, std::int64_t r_t);

// Evaluates the closed-form 2D shuffle index once per output element:
// Y[c, t, h, w] = F[C r (w mod r) + C (h mod r) + c, t, floor(h / r), floor(w / r)].
template <typename T>
Tensor<T> pixel_shuffle_2d_video(const Tensor<T>& x, std::int64_t r_s);

// Source channel index used by the 2D shuffle for output (c, h, w).
std::int64_t shuffle_2d_source_channel(std::int64_t C, std::int64_t r, std::int64_t c, std::int64_t h, std::int64_t w);

}  // namespace turbovaed::reference
