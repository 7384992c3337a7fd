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

#include "turbovaed/reference/reference_ops.hpp"

#include <cmath>

namespace turbovaed::reference {

template <typename T>
T padded_at(const Tensor<T>& x, std::int64_t n, std::int64_t c, std::int64_t t, std::int64_t h, std::int64_t w,
            TemporalPadding temporal) {
  if (h < 0 || h >= x.h() || w < 0 || w >= x.w()) return T(0);
  if (t >= x.t()) return T(0);
  if (t < 0) {
    if (temporal == TemporalPadding::zero) return T(0);
    t = 0;
  }
  return x(n, c, t, h, w);
}

namespace {

// Offset of the first tap relative to the output coordinate.
std::int64_t temporal_origin(std::int64_t kt, TemporalPadding temporal) {
  return temporal == TemporalPadding::causal_replicate ? -(kt - 1) : -(kt / 2);
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Conv3dParams<T>& p) {
  p.validate();
  if (x.c() != p.c_in()) throw ShapeError("reference::conv3d: channel mismatch");
  const std::int64_t kt = p.weight.dim(2), kh = p.weight.dim(3), kw = p.weight.dim(4);
  const std::int64_t ot = temporal_origin(kt, p.temporal);
  Tensor<T> out({x.n(), p.c_out(), x.t(), x.h(), x.w()});
  for (std::int64_t n = 0; n < x.n(); ++n)
    for (std::int64_t co = 0; co < p.c_out(); ++co)
      for (std::int64_t t = 0; t < x.t(); ++t)
        for (std::int64_t h = 0; h < x.h(); ++h)
          for (std::int64_t w = 0; w < x.w(); ++w) {
            double acc = p.bias.empty() ? 0.0 : static_cast<double>(p.bias[static_cast<std::size_t>(co)]);
            for (std::int64_t ci = 0; ci < p.c_in(); ++ci)
              for (std::int64_t i = 0; i < kt; ++i)
                for (std::int64_t j = 0; j < kh; ++j)
                  for (std::int64_t f = 0; f < kw; ++f) {
                    acc += static_cast<double>(p.weight(co, ci, i, j, f)) *
                           static_cast<double>(
                               padded_at(x, n, ci, t + ot + i, h + j - kh / 2, w + f - kw / 2, p.temporal));
                  }
            out(n, co, t, h, w) = static_cast<T>(acc);
          }
  return out;
}

template <typename T>
Tensor<T> depthwise_conv3d(const Tensor<T>& x, const DwSepConv3dParams<T>& p) {
  p.validate();
  if (x.c() != p.c_in()) throw ShapeError("reference::depthwise_conv3d: channel mismatch");
  const std::int64_t kt = p.depthwise.dim(2), kh = p.depthwise.dim(3), kw = p.depthwise.dim(4);
  const std::int64_t ot = temporal_origin(kt, p.temporal);
  Tensor<T> out(x.shape());
  for (std::int64_t n = 0; n < x.n(); ++n)
    for (std::int64_t m = 0; m < x.c(); ++m)
      for (std::int64_t t = 0; t < x.t(); ++t)
        for (std::int64_t h = 0; h < x.h(); ++h)
          for (std::int64_t w = 0; w < x.w(); ++w) {
            double acc =
                p.depthwise_bias.empty() ? 0.0 : static_cast<double>(p.depthwise_bias[static_cast<std::size_t>(m)]);
            for (std::int64_t i = 0; i < kt; ++i)
              for (std::int64_t j = 0; j < kh; ++j)
                for (std::int64_t f = 0; f < kw; ++f) {
                  acc += static_cast<double>(p.depthwise(m, 0, i, j, f)) *
                         static_cast<double>(
                             padded_at(x, n, m, t + ot + i, h + j - kh / 2, w + f - kw / 2, p.temporal));
                }
            out(n, m, t, h, w) = static_cast<T>(acc);
          }
  return out;
}

template <typename T>
Tensor<T> dwsep_conv3d(const Tensor<T>& x, const DwSepConv3dParams<T>& p) {
  const Tensor<T> g = reference::depthwise_conv3d(x, p);
  Tensor<T> out({x.n(), p.c_out(), x.t(), x.h(), x.w()});
  for (std::int64_t n = 0; n < x.n(); ++n)
    for (std::int64_t co = 0; co < p.c_out(); ++co)
      for (std::int64_t t = 0; t < x.t(); ++t)
        for (std::int64_t h = 0; h < x.h(); ++h)
          for (std::int64_t w = 0; w < x.w(); ++w) {
            double acc =
                p.pointwise_bias.empty() ? 0.0 : static_cast<double>(p.pointwise_bias[static_cast<std::size_t>(co)]);
            for (std::int64_t m = 0; m < p.c_in(); ++m) {
              acc += static_cast<double>(p.pointwise(co, m, 0, 0, 0)) * static_cast<double>(g(n, m, t, h, w));
            }
            out(n, co, t, h, w) = static_cast<T>(acc);
          }
  return out;
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const GroupNormParams<T>& p) {
  p.validate(x.c());
  const std::int64_t cpg = x.c() / p.num_groups;
  Tensor<T> out(x.shape());
  for (std::int64_t n = 0; n < x.n(); ++n)
    for (std::int64_t g = 0; g < p.num_groups; ++g) {
      double s = 0.0, s2 = 0.0, count = 0.0;
      for (std::int64_t c = g * cpg; c < (g + 1) * cpg; ++c)
        for (std::int64_t t = 0; t < x.t(); ++t)
          for (std::int64_t h = 0; h < x.h(); ++h)
            for (std::int64_t w = 0; w < x.w(); ++w) {
              s += static_cast<double>(x(n, c, t, h, w));
              count += 1.0;
            }
      const double mean = s / count;
      for (std::int64_t c = g * cpg; c < (g + 1) * cpg; ++c)
        for (std::int64_t t = 0; t < x.t(); ++t)
          for (std::int64_t h = 0; h < x.h(); ++h)
            for (std::int64_t w = 0; w < x.w(); ++w) {
              const double d = static_cast<double>(x(n, c, t, h, w)) - mean;
              s2 += d * d;
            }
      const double denom = std::sqrt(s2 / count + p.epsilon);
      for (std::int64_t c = g * cpg; c < (g + 1) * cpg; ++c)
        for (std::int64_t t = 0; t < x.t(); ++t)
          for (std::int64_t h = 0; h < x.h(); ++h)
            for (std::int64_t w = 0; w < x.w(); ++w) {
              const double xhat = (static_cast<double>(x(n, c, t, h, w)) - mean) / denom;
              out(n, c, t, h, w) = static_cast<T>(xhat * static_cast<double>(p.gamma[static_cast<std::size_t>(c)]) +
                                                  static_cast<double>(p.beta[static_cast<std::size_t>(c)]));
            }
    }
  return out;
}

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double v = static_cast<double>(x[i]);
    out[i] = static_cast<T>(v / (1.0 + std::exp(-v)));
  }
  return out;
}

template <typename T>
Tensor<T> pixel_shuffle_3d(const Tensor<T>& x, std::int64_t r_t, std::int64_t r_s) {
  const std::int64_t C = x.c() / (r_t * r_s * r_s);
  if (C * r_t * r_s * r_s != x.c()) throw ShapeError("reference::pixel_shuffle_3d: channels not divisible");
  Tensor<T> y({x.n(), C, x.t() * r_t, x.h() * r_s, x.w() * r_s});
  for (std::int64_t n = 0; n < y.n(); ++n)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t to = 0; to < y.t(); ++to)
        for (std::int64_t ho = 0; ho < y.h(); ++ho)
          for (std::int64_t wo = 0; wo < y.w(); ++wo) {
            const std::int64_t dt = to % r_t, dh = ho % r_s, dw = wo % r_s;
            const std::int64_t k = ((c * r_t + dt) * r_s + dh) * r_s + dw;
            y(n, c, to, ho, wo) = x(n, k, to / r_t, ho / r_s, wo / r_s);
          }
  return y;
}

template <typename T>
Tensor<T> channel_to_time(const Tensor<T>& x, std::int64_t r_t) {
  const std::int64_t C = x.c() / r_t;
  if (C * r_t != x.c()) throw ShapeError("reference::channel_to_time: channels not divisible");
  Tensor<T> y({x.n(), C, x.t() * r_t, x.h(), x.w()});
  for (std::int64_t n = 0; n < y.n(); ++n)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t to = 0; to < y.t(); ++to)
        for (std::int64_t h = 0; h < y.h(); ++h)
          for (std::int64_t w = 0; w < y.w(); ++w) {
            const std::int64_t j = to % r_t;
            y(n, c, to, h, w) = x(n, j * C + c, to / r_t, h, w);
          }
  return y;
}

std::int64_t shuffle_2d_source_channel(std::int64_t C, std::int64_t r, std::int64_t c, std::int64_t h, std::int64_t w) {
  return C * r * (w % r) + C * (h % r) + c;
}

template <typename T>
Tensor<T> pixel_shuffle_2d_video(const Tensor<T>& x, std::int64_t r_s) {
  const std::int64_t C = x.c() / (r_s * r_s);
  if (C * r_s * r_s != x.c()) throw ShapeError("reference::pixel_shuffle_2d_video: channels not divisible");
  Tensor<T> y({x.n(), C, x.t(), x.h() * r_s, x.w() * r_s});
  for (std::int64_t n = 0; n < y.n(); ++n)
    for (std::int64_t c = 0; c < C; ++c)
      for (std::int64_t t = 0; t < y.t(); ++t)
        for (std::int64_t h = 0; h < y.h(); ++h)
          for (std::int64_t w = 0; w < y.w(); ++w) {
            y(n, c, t, h, w) = x(n, shuffle_2d_source_channel(C, r_s, c, h, w), t, h / r_s, w / r_s);
          }
  return y;
}

#define TURBOVAED_INSTANTIATE(T)                                                                                 \
  template T padded_at(const Tensor<T>&, std::int64_t, std::int64_t, std::int64_t, std::int64_t, std::int64_t, \
                       TemporalPadding);                                                                         \
  template Tensor<T> conv3d(const Tensor<T>&, const Conv3dParams<T>&);                                           \
  template Tensor<T> depthwise_conv3d(const Tensor<T>&, const DwSepConv3dParams<T>&);                            \
  template Tensor<T> dwsep_conv3d(const Tensor<T>&, const DwSepConv3dParams<T>&);                                \
  template Tensor<T> group_norm(const Tensor<T>&, const GroupNormParams<T>&);                                    \
  template Tensor<T> silu(const Tensor<T>&);                                                                     \
  template Tensor<T> pixel_shuffle_3d(const Tensor<T>&, std::int64_t, std::int64_t);                             \
  template Tensor<T> channel_to_time(const Tensor<T>&, std::int64_t);                                            \
  template Tensor<T> pixel_shuffle_2d_video(const Tensor<T>&, std::int64_t);

TURBOVAED_INSTANTIATE(float)
TURBOVAED_INSTANTIATE(double)

#undef TURBOVAED_INSTANTIATE

}  // namespace turbovaed::reference
