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

#include "turbovaed/upsample.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace turbovaed {

void UpsampleFactors::validate() const {
  if (r_t < 1 || r_s < 1) {
    throw ConfigError("upsample factors must be >= 1, got (" + std::to_string(r_t) + ", " + std::to_string(r_s) +
                      ")");
  }
}

Shape5 upsampled_shape(const Shape5& in, const UpsampleFactors& f, bool shuffle_family) {
  f.validate();
  const std::int64_t c = shuffle_family ? in[1] / f.channel_multiplier() : in[1];
  return {in[0], c, in[2] * f.r_t, in[3] * f.r_s, in[4] * f.r_s};
}

namespace {

void require_divisible(std::int64_t channels, std::int64_t by, const char* op) {
  if (by < 1) throw ConfigError(std::string(op) + ": factor must be >= 1");
  if (channels % by != 0) {
    throw ShapeError(std::string(op) + ": " + std::to_string(channels) + " channels not divisible by " +
                     std::to_string(by));
  }
}

// Shared gather for the shuffle family. `src_channel(c, dt, dh, dw)` names the
// input channel that lands at output offset (dt, dh, dw) of target channel c.
// kInverse runs the adjoint scatter (y -> x).
template <bool kInverse, typename T, typename ChannelMap>
void shuffle_kernel(const T* in, T* out, std::int64_t N, std::int64_t C, std::int64_t T_, std::int64_t H,
                    std::int64_t W, std::int64_t r_t, std::int64_t r_s, ChannelMap src_channel) {
  const std::int64_t Cin = C * r_t * r_s * r_s;
  const std::int64_t To = T_ * r_t, Ho = H * r_s, Wo = W * r_s;
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      for (std::int64_t dt = 0; dt < r_t; ++dt) {
        for (std::int64_t dh = 0; dh < r_s; ++dh) {
          for (std::int64_t dw = 0; dw < r_s; ++dw) {
            const std::int64_t k = src_channel(c, dt, dh, dw);
            for (std::int64_t t = 0; t < T_; ++t) {
              for (std::int64_t h = 0; h < H; ++h) {
                const std::int64_t xi = (((n * Cin + k) * T_ + t) * H + h) * W;
                const std::int64_t yi = (((n * C + c) * To + t * r_t + dt) * Ho + h * r_s + dh) * Wo + dw;
                if constexpr (!kInverse) {
                  const T* src = in + xi;
                  T* dst = out + yi;
                  for (std::int64_t w = 0; w < W; ++w) dst[w * r_s] = src[w];
                } else {
                  const T* src = in + yi;
                  T* dst = out + xi;
                  for (std::int64_t w = 0; w < W; ++w) dst[w] = src[w * r_s];
                }
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> pixel_shuffle_3d(const Tensor<T>& x, std::int64_t r_t, std::int64_t r_s) {
  UpsampleFactors{r_t, r_s}.validate();
  require_divisible(x.c(), r_t * r_s * r_s, "pixel_shuffle_3d");
  if (r_t == 1 && r_s == 1) return x;
  const std::int64_t C = x.c() / (r_t * r_s * r_s);
  Tensor<T> y({x.n(), C, x.t() * r_t, x.h() * r_s, x.w() * r_s});
  shuffle_kernel<false>(x.raw(), y.raw(), x.n(), C, x.t(), x.h(), x.w(), r_t, r_s,
                        [=](std::int64_t c, std::int64_t dt, std::int64_t dh, std::int64_t dw) {
                          return ((c * r_t + dt) * r_s + dh) * r_s + dw;
                        });
  return y;
}

template <typename T>
Tensor<T> pixel_unshuffle_3d(const Tensor<T>& y, std::int64_t r_t, std::int64_t r_s) {
  UpsampleFactors{r_t, r_s}.validate();
  if (y.t() % r_t || y.h() % r_s || y.w() % r_s) {
    throw ShapeError("pixel_unshuffle_3d: extents " + to_string(y.shape()) + " not divisible by factors");
  }
  const std::int64_t C = y.c();
  Tensor<T> x({y.n(), C * r_t * r_s * r_s, y.t() / r_t, y.h() / r_s, y.w() / r_s});
  shuffle_kernel<true>(y.raw(), x.raw(), y.n(), C, x.t(), x.h(), x.w(), r_t, r_s,
                       [=](std::int64_t c, std::int64_t dt, std::int64_t dh, std::int64_t dw) {
                         return ((c * r_t + dt) * r_s + dh) * r_s + dw;
                       });
  return x;
}

template <typename T>
Tensor<T> channel_to_time(const Tensor<T>& x, std::int64_t r_t) {
  require_divisible(x.c(), r_t, "channel_to_time");
  const std::int64_t C = x.c() / r_t, T_ = x.t(), plane = x.h() * x.w();
  Tensor<T> y({x.n(), C, T_ * r_t, x.h(), x.w()});
  for (std::int64_t n = 0; n < x.n(); ++n)
    for (std::int64_t j = 0; j < r_t; ++j)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t t = 0; t < T_; ++t) {
          std::memcpy(y.raw() + y.offset(n, c, r_t * t + j, 0, 0), x.raw() + x.offset(n, j * C + c, t, 0, 0),
                      static_cast<std::size_t>(plane) * sizeof(T));
        }
  return y;
}

template <typename T>
Tensor<T> time_to_channel(const Tensor<T>& y, std::int64_t r_t) {
  if (r_t < 1) throw ConfigError("time_to_channel: factor must be >= 1");
  if (y.t() % r_t) throw ShapeError("time_to_channel: " + std::to_string(y.t()) + " frames not divisible");
  const std::int64_t C = y.c(), T_ = y.t() / r_t, plane = y.h() * y.w();
  Tensor<T> x({y.n(), C * r_t, T_, y.h(), y.w()});
  for (std::int64_t n = 0; n < y.n(); ++n)
    for (std::int64_t j = 0; j < r_t; ++j)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t t = 0; t < T_; ++t) {
          std::memcpy(x.raw() + x.offset(n, j * C + c, t, 0, 0), y.raw() + y.offset(n, c, r_t * t + j, 0, 0),
                      static_cast<std::size_t>(plane) * sizeof(T));
        }
  return x;
}

template <typename T>
Tensor<T> pixel_shuffle_2d_video(const Tensor<T>& x, std::int64_t r_s) {
  UpsampleFactors{1, r_s}.validate();
  require_divisible(x.c(), r_s * r_s, "pixel_shuffle_2d_video");
  const std::int64_t C = x.c() / (r_s * r_s);
  Tensor<T> y({x.n(), C, x.t(), x.h() * r_s, x.w() * r_s});
  shuffle_kernel<false>(x.raw(), y.raw(), x.n(), C, x.t(), x.h(), x.w(), 1, r_s,
                        [=](std::int64_t c, std::int64_t, std::int64_t dh, std::int64_t dw) {
                          return C * r_s * dw + C * dh + c;
                        });
  return y;
}

template <typename T>
Tensor<T> pixel_unshuffle_2d_video(const Tensor<T>& y, std::int64_t r_s) {
  UpsampleFactors{1, r_s}.validate();
  if (y.h() % r_s || y.w() % r_s) {
    throw ShapeError("pixel_unshuffle_2d_video: extents " + to_string(y.shape()) + " not divisible");
  }
  const std::int64_t C = y.c();
  Tensor<T> x({y.n(), C * r_s * r_s, y.t(), y.h() / r_s, y.w() / r_s});
  shuffle_kernel<true>(y.raw(), x.raw(), y.n(), C, x.t(), x.h(), x.w(), 1, r_s,
                       [=](std::int64_t c, std::int64_t, std::int64_t dh, std::int64_t dw) {
                         return C * r_s * dw + C * dh + c;
                       });
  return x;
}

template <typename T>
Tensor<T> decoupled_upsample(const Tensor<T>& x, const UpsampleFactors& f) {
  f.validate();
  require_divisible(x.c(), f.channel_multiplier(), "decoupled_upsample");
  const std::int64_t r_t = f.r_t, r_s = f.r_s;
  const std::int64_t C = x.c() / f.channel_multiplier();
  const std::int64_t block = r_s * r_s * C;
  Tensor<T> y({x.n(), C, x.t() * r_t, x.h() * r_s, x.w() * r_s});
  shuffle_kernel<false>(x.raw(), y.raw(), x.n(), C, x.t(), x.h(), x.w(), r_t, r_s,
                        [=](std::int64_t c, std::int64_t dt, std::int64_t dh, std::int64_t dw) {
                          return dt * block + C * r_s * dw + C * dh + c;
                        });
  return y;
}

template <typename T>
Tensor<T> decoupled_downsample(const Tensor<T>& y, const UpsampleFactors& f) {
  f.validate();
  if (y.t() % f.r_t || y.h() % f.r_s || y.w() % f.r_s) {
    throw ShapeError("decoupled_downsample: extents " + to_string(y.shape()) + " not divisible");
  }
  const std::int64_t r_t = f.r_t, r_s = f.r_s;
  const std::int64_t C = y.c();
  const std::int64_t block = r_s * r_s * C;
  Tensor<T> x({y.n(), C * f.channel_multiplier(), y.t() / r_t, y.h() / r_s, y.w() / r_s});
  shuffle_kernel<true>(y.raw(), x.raw(), y.n(), C, x.t(), x.h(), x.w(), r_t, r_s,
                       [=](std::int64_t c, std::int64_t dt, std::int64_t dh, std::int64_t dw) {
                         return dt * block + C * r_s * dw + C * dh + c;
                       });
  return x;
}

template <typename T>
Tensor<T> decoupled_upsample_two_step(const Tensor<T>& x, const UpsampleFactors& f) {
  f.validate();
  require_divisible(x.c(), f.channel_multiplier(), "decoupled_upsample");
  return pixel_shuffle_2d_video(channel_to_time(x, f.r_t), f.r_s);
}

template <typename T>
Tensor<T> permute_channels(const Tensor<T>& x, const std::vector<std::int64_t>& perm) {
  if (static_cast<std::int64_t>(perm.size()) != x.c()) {
    throw ShapeError("permute_channels: permutation length " + std::to_string(perm.size()) + " != channels " +
                     std::to_string(x.c()));
  }
  std::vector<bool> seen(perm.size(), false);
  for (const auto k : perm) {
    if (k < 0 || k >= x.c() || seen[static_cast<std::size_t>(k)]) {
      throw ShapeError("permute_channels: not a permutation");
    }
    seen[static_cast<std::size_t>(k)] = true;
  }
  Tensor<T> y(x.shape());
  const std::int64_t vol = x.t() * x.h() * x.w();
  for (std::int64_t n = 0; n < x.n(); ++n)
    for (std::int64_t k = 0; k < x.c(); ++k)
      std::memcpy(y.volume(n, k), x.volume(n, perm[static_cast<std::size_t>(k)]),
                  static_cast<std::size_t>(vol) * sizeof(T));
  return y;
}

namespace {

struct Tap {
  std::int64_t i0, i1;
  double w0, w1;
};

std::vector<Tap> axis_taps(std::int64_t in_len, std::int64_t factor, InterpolationMode mode) {
  const std::int64_t out_len = in_len * factor;
  std::vector<Tap> taps(static_cast<std::size_t>(out_len));
  for (std::int64_t o = 0; o < out_len; ++o) {
    if (mode == InterpolationMode::nearest) {
      const std::int64_t i = o / factor;
      taps[static_cast<std::size_t>(o)] = {i, i, 1.0, 0.0};
      continue;
    }
    double src = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
    if (src < 0.0) src = 0.0;
    std::int64_t i0 = static_cast<std::int64_t>(std::floor(src));
    if (i0 > in_len - 1) i0 = in_len - 1;
    const std::int64_t i1 = std::min(i0 + 1, in_len - 1);
    const double lambda = src - static_cast<double>(i0);
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - lambda, lambda};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> interpolate_3d(const Tensor<T>& x, const UpsampleFactors& f, InterpolationMode mode) {
  f.validate();
  if (x.t() < 1 || x.h() < 1 || x.w() < 1) throw ShapeError("interpolate_3d: extents must be >= 1");
  const auto tt = axis_taps(x.t(), f.r_t, mode);
  const auto th = axis_taps(x.h(), f.r_s, mode);
  const auto tw = axis_taps(x.w(), f.r_s, mode);
  Tensor<T> y(upsampled_shape(x.shape(), f, false));
  const std::int64_t To = y.t(), Ho = y.h(), Wo = y.w();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < x.n(); ++n) {
    for (std::int64_t c = 0; c < x.c(); ++c) {
      const T* src = x.volume(n, c);
      T* dst = y.volume(n, c);
      for (std::int64_t t = 0; t < To; ++t) {
        const Tap a = tt[static_cast<std::size_t>(t)];
        for (std::int64_t h = 0; h < Ho; ++h) {
          const Tap b = th[static_cast<std::size_t>(h)];
          for (std::int64_t w = 0; w < Wo; ++w) {
            const Tap d = tw[static_cast<std::size_t>(w)];
            auto at = [&](std::int64_t ti, std::int64_t hi, std::int64_t wi) {
              return static_cast<double>(src[(ti * x.h() + hi) * x.w() + wi]);
            };
            double v;
            if (mode == InterpolationMode::nearest) {
              v = at(a.i0, b.i0, d.i0);
            } else {
              v = a.w0 * (b.w0 * (d.w0 * at(a.i0, b.i0, d.i0) + d.w1 * at(a.i0, b.i0, d.i1)) +
                          b.w1 * (d.w0 * at(a.i0, b.i1, d.i0) + d.w1 * at(a.i0, b.i1, d.i1))) +
                  a.w1 * (b.w0 * (d.w0 * at(a.i1, b.i0, d.i0) + d.w1 * at(a.i1, b.i0, d.i1)) +
                          b.w1 * (d.w0 * at(a.i1, b.i1, d.i0) + d.w1 * at(a.i1, b.i1, d.i1)));
            }
            dst[(t * Ho + h) * Wo + w] = static_cast<T>(v);
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> interpolate_3d_grad(const Shape5& input_shape, const UpsampleFactors& f, InterpolationMode mode,
                              const Tensor<T>& upstream) {
  f.validate();
  if (upstream.shape() != upsampled_shape(input_shape, f, false)) {
    throw ShapeError("interpolate_3d_grad: upstream shape " + to_string(upstream.shape()) + " mismatch");
  }
  const auto tt = axis_taps(input_shape[2], f.r_t, mode);
  const auto th = axis_taps(input_shape[3], f.r_s, mode);
  const auto tw = axis_taps(input_shape[4], f.r_s, mode);
  Tensor<T> dx(input_shape);
  const std::int64_t H = input_shape[3], W = input_shape[4];
  const std::int64_t To = upstream.t(), Ho = upstream.h(), Wo = upstream.w();
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < input_shape[0]; ++n) {
    for (std::int64_t c = 0; c < input_shape[1]; ++c) {
      const T* gy = upstream.volume(n, c);
      T* g = dx.volume(n, c);
      for (std::int64_t t = 0; t < To; ++t) {
        const Tap a = tt[static_cast<std::size_t>(t)];
        for (std::int64_t h = 0; h < Ho; ++h) {
          const Tap b = th[static_cast<std::size_t>(h)];
          for (std::int64_t w = 0; w < Wo; ++w) {
            const Tap d = tw[static_cast<std::size_t>(w)];
            const double v = static_cast<double>(gy[(t * Ho + h) * Wo + w]);
            auto put = [&](std::int64_t ti, std::int64_t hi, std::int64_t wi, double wt) {
              g[(ti * H + hi) * W + wi] += static_cast<T>(v * wt);
            };
            if (mode == InterpolationMode::nearest) {
              put(a.i0, b.i0, d.i0, 1.0);
              continue;
            }
            put(a.i0, b.i0, d.i0, a.w0 * b.w0 * d.w0);
            put(a.i0, b.i0, d.i1, a.w0 * b.w0 * d.w1);
            put(a.i0, b.i1, d.i0, a.w0 * b.w1 * d.w0);
            put(a.i0, b.i1, d.i1, a.w0 * b.w1 * d.w1);
            put(a.i1, b.i0, d.i0, a.w1 * b.w0 * d.w0);
            put(a.i1, b.i0, d.i1, a.w1 * b.w0 * d.w1);
            put(a.i1, b.i1, d.i0, a.w1 * b.w1 * d.w0);
            put(a.i1, b.i1, d.i1, a.w1 * b.w1 * d.w1);
          }
        }
      }
    }
  }
  return dx;
}

#define TURBOVAED_INSTANTIATE(T)                                                                           \
  template Tensor<T> pixel_shuffle_3d(const Tensor<T>&, std::int64_t, std::int64_t);                       \
  template Tensor<T> pixel_unshuffle_3d(const Tensor<T>&, std::int64_t, std::int64_t);                     \
  template Tensor<T> channel_to_time(const Tensor<T>&, std::int64_t);                                      \
  template Tensor<T> time_to_channel(const Tensor<T>&, std::int64_t);                                      \
  template Tensor<T> pixel_shuffle_2d_video(const Tensor<T>&, std::int64_t);                               \
  template Tensor<T> pixel_unshuffle_2d_video(const Tensor<T>&, std::int64_t);                             \
  template Tensor<T> decoupled_upsample(const Tensor<T>&, const UpsampleFactors&);                         \
  template Tensor<T> decoupled_downsample(const Tensor<T>&, const UpsampleFactors&);                       \
  template Tensor<T> decoupled_upsample_two_step(const Tensor<T>&, const UpsampleFactors&);                \
  template Tensor<T> permute_channels(const Tensor<T>&, const std::vector<std::int64_t>&);                 \
  template Tensor<T> interpolate_3d(const Tensor<T>&, const UpsampleFactors&, InterpolationMode);          \
  template Tensor<T> interpolate_3d_grad(const Shape5&, const UpsampleFactors&, InterpolationMode,          \
                                         const Tensor<T>&);

TURBOVAED_INSTANTIATE(float)
TURBOVAED_INSTANTIATE(double)

#undef TURBOVAED_INSTANTIATE

}  // namespace turbovaed
