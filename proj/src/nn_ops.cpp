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

#include "turbovaed/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

namespace turbovaed {

const char* to_string(TemporalPadding p) {
  return p == TemporalPadding::causal_replicate ? "causal_replicate" : "zero";
}

TemporalPadding parse_temporal_padding(const std::string& s) {
  if (s == "causal_replicate") return TemporalPadding::causal_replicate;
  if (s == "zero") return TemporalPadding::zero;
  throw ConfigError("unknown temporal padding '" + s + "'");
}

namespace {

void require_odd_kernel(std::int64_t kt, std::int64_t kh, std::int64_t kw, const char* op) {
  if (kt < 1 || kh < 1 || kw < 1 || kt % 2 == 0 || kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError(std::string(op) + ": kernel extents must be odd, got " + std::to_string(kt) + "x" +
                      std::to_string(kh) + "x" + std::to_string(kw));
  }
}

// Geometry of one stride-1 "same" correlation over a (T, H, W) volume.
struct Geometry {
  std::int64_t T, H, W;
  std::int64_t kt, kh, kw;
  std::int64_t ph, pw;
  TemporalPadding temporal;

  // Source frame for output frame t and temporal tap dt, or -1 for a zero pad.
  std::int64_t src_t(std::int64_t t, std::int64_t dt) const {
    if (temporal == TemporalPadding::causal_replicate) {
      const std::int64_t s = t + dt - (kt - 1);
      return s < 0 ? 0 : s;
    }
    const std::int64_t s = t + dt - kt / 2;
    return (s < 0 || s >= T) ? -1 : s;
  }
};

Geometry make_geometry(const Shape5& x, std::int64_t kt, std::int64_t kh, std::int64_t kw, TemporalPadding tp) {
  return Geometry{x[2], x[3], x[4], kt, kh, kw, kh / 2, kw / 2, tp};
}

// out_vol += correlate(in_vol, taps).
template <typename T>
void correlate_accumulate(T* out, const T* in, const T* taps, const Geometry& g) {
  for (std::int64_t dt = 0; dt < g.kt; ++dt) {
    for (std::int64_t t = 0; t < g.T; ++t) {
      const std::int64_t ts = g.src_t(t, dt);
      if (ts < 0) continue;
      for (std::int64_t dh = 0; dh < g.kh; ++dh) {
        const std::int64_t h0 = std::max<std::int64_t>(0, g.ph - dh);
        const std::int64_t h1 = std::min<std::int64_t>(g.H, g.H + g.ph - dh);
        for (std::int64_t h = h0; h < h1; ++h) {
          const T* irow = in + (ts * g.H + h + dh - g.ph) * g.W;
          T* orow = out + (t * g.H + h) * g.W;
          const T* k = taps + (dt * g.kh + dh) * g.kw;
          for (std::int64_t dw = 0; dw < g.kw; ++dw) {
            const T kv = k[dw];
            const std::int64_t w0 = std::max<std::int64_t>(0, g.pw - dw);
            const std::int64_t w1 = std::min<std::int64_t>(g.W, g.W + g.pw - dw);
            const T* src = irow + dw - g.pw;
            for (std::int64_t w = w0; w < w1; ++w) orow[w] += kv * src[w];
          }
        }
      }
    }
  }
}

// dx_vol += correlate^T(gy_vol, taps).
template <typename T>
void correlate_transpose_accumulate(T* dx, const T* gy, const T* taps, const Geometry& g) {
  for (std::int64_t dt = 0; dt < g.kt; ++dt) {
    for (std::int64_t t = 0; t < g.T; ++t) {
      const std::int64_t ts = g.src_t(t, dt);
      if (ts < 0) continue;
      for (std::int64_t dh = 0; dh < g.kh; ++dh) {
        const std::int64_t h0 = std::max<std::int64_t>(0, g.ph - dh);
        const std::int64_t h1 = std::min<std::int64_t>(g.H, g.H + g.ph - dh);
        for (std::int64_t h = h0; h < h1; ++h) {
          T* xrow = dx + (ts * g.H + h + dh - g.ph) * g.W;
          const T* grow = gy + (t * g.H + h) * g.W;
          const T* k = taps + (dt * g.kh + dh) * g.kw;
          for (std::int64_t dw = 0; dw < g.kw; ++dw) {
            const T kv = k[dw];
            const std::int64_t w0 = std::max<std::int64_t>(0, g.pw - dw);
            const std::int64_t w1 = std::min<std::int64_t>(g.W, g.W + g.pw - dw);
            T* dst = xrow + dw - g.pw;
            for (std::int64_t w = w0; w < w1; ++w) dst[w] += kv * grow[w];
          }
        }
      }
    }
  }
}

// dtaps += d/dtaps <gy, correlate(x, taps)>, accumulated in double.
template <typename T>
void correlate_weight_accumulate(double* dtaps, const T* gy, const T* x, const Geometry& g) {
  for (std::int64_t dt = 0; dt < g.kt; ++dt) {
    for (std::int64_t t = 0; t < g.T; ++t) {
      const std::int64_t ts = g.src_t(t, dt);
      if (ts < 0) continue;
      for (std::int64_t dh = 0; dh < g.kh; ++dh) {
        const std::int64_t h0 = std::max<std::int64_t>(0, g.ph - dh);
        const std::int64_t h1 = std::min<std::int64_t>(g.H, g.H + g.ph - dh);
        for (std::int64_t h = h0; h < h1; ++h) {
          const T* xrow = x + (ts * g.H + h + dh - g.ph) * g.W;
          const T* grow = gy + (t * g.H + h) * g.W;
          double* d = dtaps + (dt * g.kh + dh) * g.kw;
          for (std::int64_t dw = 0; dw < g.kw; ++dw) {
            const std::int64_t w0 = std::max<std::int64_t>(0, g.pw - dw);
            const std::int64_t w1 = std::min<std::int64_t>(g.W, g.W + g.pw - dw);
            const T* src = xrow + dw - g.pw;
            T acc = 0;
            for (std::int64_t w = w0; w < w1; ++w) acc += grow[w] * src[w];
            d[dw] += static_cast<double>(acc);
          }
        }
      }
    }
  }
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

// Output rows [h0, h1) of frame t of sample n.
struct FrameBlock {
  std::int64_t n, t, h0, h1;
};

// Splits every output frame into row blocks whose unfolded matrix stays below
// about 1M elements.
std::vector<FrameBlock> frame_blocks(std::int64_t N, const Geometry& g, std::int64_t K) {
  constexpr std::int64_t kMaxUnfolded = std::int64_t{1} << 20;
  const std::int64_t rows = std::clamp<std::int64_t>(kMaxUnfolded / std::max<std::int64_t>(1, K * g.W), 1, g.H);
  std::vector<FrameBlock> out;
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t t = 0; t < g.T; ++t)
      for (std::int64_t h0 = 0; h0 < g.H; h0 += rows) out.push_back({n, t, h0, std::min(g.H, h0 + rows)});
  return out;
}

// col[(ci, dt, dh, dw), (h - h0) * W + w] = padded x[n, ci, src_t(t, dt), h + dh - ph, w + dw - pw]
template <typename T>
void unfold_frame(T* col, const Tensor<T>& x, const FrameBlock& b, const Geometry& g) {
  const std::int64_t cols = (b.h1 - b.h0) * g.W;
  T* row = col;
  for (std::int64_t ci = 0; ci < x.c(); ++ci) {
    const T* vol = x.volume(b.n, ci);
    for (std::int64_t dt = 0; dt < g.kt; ++dt) {
      const std::int64_t ts = g.src_t(b.t, dt);
      for (std::int64_t dh = 0; dh < g.kh; ++dh) {
        for (std::int64_t dw = 0; dw < g.kw; ++dw, row += cols) {
          if (ts < 0) {
            std::fill(row, row + cols, T(0));
            continue;
          }
          const std::int64_t w0 = std::min<std::int64_t>(g.W, std::max<std::int64_t>(0, g.pw - dw));
          const std::int64_t w1 = std::max<std::int64_t>(w0, std::min<std::int64_t>(g.W, g.W + g.pw - dw));
          for (std::int64_t h = b.h0; h < b.h1; ++h) {
            T* dst = row + (h - b.h0) * g.W;
            const std::int64_t hs = h + dh - g.ph;
            if (hs < 0 || hs >= g.H) {
              std::fill(dst, dst + g.W, T(0));
              continue;
            }
            const T* src = vol + (ts * g.H + hs) * g.W + dw - g.pw;
            std::fill(dst, dst + w0, T(0));
            std::copy(src + w0, src + w1, dst + w0);
            std::fill(dst + w1, dst + g.W, T(0));
          }
        }
      }
    }
  }
}

// Adjoint of unfold_frame: scatter-adds the unfolded gradient into dx.
template <typename T>
void fold_frame_add(Tensor<T>& dx, const T* col, const FrameBlock& b, const Geometry& g) {
  const std::int64_t cols = (b.h1 - b.h0) * g.W;
  const T* row = col;
  for (std::int64_t ci = 0; ci < dx.c(); ++ci) {
    T* vol = dx.volume(b.n, ci);
    for (std::int64_t dt = 0; dt < g.kt; ++dt) {
      const std::int64_t ts = g.src_t(b.t, dt);
      for (std::int64_t dh = 0; dh < g.kh; ++dh) {
        for (std::int64_t dw = 0; dw < g.kw; ++dw, row += cols) {
          if (ts < 0) continue;
          const std::int64_t w0 = std::max<std::int64_t>(0, g.pw - dw);
          const std::int64_t w1 = std::min<std::int64_t>(g.W, g.W + g.pw - dw);
          for (std::int64_t h = b.h0; h < b.h1; ++h) {
            const std::int64_t hs = h + dh - g.ph;
            if (hs < 0 || hs >= g.H) continue;
            const T* src = row + (h - b.h0) * g.W;
            T* dst = vol + (ts * g.H + hs) * g.W + dw - g.pw;
            for (std::int64_t w = w0; w < w1; ++w) dst[w] += src[w];
          }
        }
      }
    }
  }
}

template <typename T>
void check_bias(const std::vector<T>& bias, std::int64_t channels, const char* what) {
  if (!bias.empty() && static_cast<std::int64_t>(bias.size()) != channels) {
    throw ShapeError(std::string(what) + ": bias length " + std::to_string(bias.size()) + " != " +
                     std::to_string(channels));
  }
}

template <typename T>
void check_input_channels(const Tensor<T>& x, std::int64_t c_in, const char* op) {
  if (x.c() != c_in) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x.c()) + " channels, kernel expects " +
                     std::to_string(c_in));
  }
  if (x.t() < 1 || x.h() < 1 || x.w() < 1) {
    throw ShapeError(std::string(op) + ": spatial extents must be >= 1, got " + to_string(x.shape()));
  }
}

template <typename T>
std::vector<T> bias_grad(const Tensor<T>& gy) {
  std::vector<T> db(static_cast<std::size_t>(gy.c()));
  const std::int64_t vol = gy.t() * gy.h() * gy.w();
  for (std::int64_t c = 0; c < gy.c(); ++c) {
    double s = 0.0;
    for (std::int64_t n = 0; n < gy.n(); ++n) {
      const T* p = gy.volume(n, c);
      for (std::int64_t i = 0; i < vol; ++i) s += static_cast<double>(p[i]);
    }
    db[static_cast<std::size_t>(c)] = static_cast<T>(s);
  }
  return db;
}

}  // namespace

template <typename T>
void Conv3dParams<T>::validate() const {
  require_odd_kernel(weight.dim(2), weight.dim(3), weight.dim(4), "conv3d");
  check_bias(bias, c_out(), "conv3d");
}

template <typename T>
void DwSepConv3dParams<T>::validate() const {
  if (depthwise.dim(1) != 1) throw ShapeError("dwsep: depthwise kernel must have channel multiplicity 1");
  require_odd_kernel(depthwise.dim(2), depthwise.dim(3), depthwise.dim(4), "dwsep");
  if (pointwise.dim(1) != c_in() || pointwise.dim(2) != 1 || pointwise.dim(3) != 1 || pointwise.dim(4) != 1) {
    throw ShapeError("dwsep: pointwise kernel " + to_string(pointwise.shape()) + " incompatible with " +
                     std::to_string(c_in()) + " depthwise channels");
  }
  check_bias(depthwise_bias, c_in(), "dwsep depthwise");
  check_bias(pointwise_bias, c_out(), "dwsep pointwise");
}

template <typename T>
void GroupNormParams<T>::validate(std::int64_t channels) const {
  if (num_groups < 1 || channels % num_groups != 0) {
    throw ConfigError("group_norm: " + std::to_string(channels) + " channels not divisible by " +
                      std::to_string(num_groups) + " groups");
  }
  if (static_cast<std::int64_t>(gamma.size()) != channels || static_cast<std::int64_t>(beta.size()) != channels) {
    throw ShapeError("group_norm: affine parameters must have length " + std::to_string(channels));
  }
  if (!(epsilon > 0.0)) throw ConfigError("group_norm: epsilon must be positive");
}

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Conv3dParams<T>& p) {
  p.validate();
  check_input_channels(x, p.c_in(), "conv3d");
  const Geometry g = make_geometry(x.shape(), p.weight.dim(2), p.weight.dim(3), p.weight.dim(4), p.temporal);
  const std::int64_t Co = p.c_out();
  const std::int64_t K = p.c_in() * g.kt * g.kh * g.kw;
  const std::int64_t vol = g.T * g.H * g.W;
  const auto items = frame_blocks(x.n(), g, K);
  const ConstMatMap<T> weight(p.weight.raw(), Co, K);
  Tensor<T> out({x.n(), Co, g.T, g.H, g.W});
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < items.size(); ++i) {
    const FrameBlock& b = items[i];
    const std::int64_t cols = (b.h1 - b.h0) * g.W;
    std::vector<T> col(static_cast<std::size_t>(K * cols));
    unfold_frame(col.data(), x, b, g);
    StridedMap<T> o(out.volume(b.n, 0) + (b.t * g.H + b.h0) * g.W, Co, cols, Eigen::OuterStride<>(vol));
    o.noalias() = weight * ConstMatMap<T>(col.data(), K, cols);
    if (!p.bias.empty()) {
      for (std::int64_t co = 0; co < Co; ++co) o.row(co).array() += p.bias[static_cast<std::size_t>(co)];
    }
  }
  check_finite(out, "conv3d");
  return out;
}

template <typename T>
ConvGrads<T> conv3d_grad(const Tensor<T>& x, const Conv3dParams<T>& p, const Tensor<T>& upstream) {
  p.validate();
  check_input_channels(x, p.c_in(), "conv3d_grad");
  const Shape5 out_shape{x.n(), p.c_out(), x.t(), x.h(), x.w()};
  if (upstream.shape() != out_shape) {
    throw ShapeError("conv3d_grad: upstream " + to_string(upstream.shape()) + " != " + to_string(out_shape));
  }
  const Geometry g = make_geometry(x.shape(), p.weight.dim(2), p.weight.dim(3), p.weight.dim(4), p.temporal);
  const std::int64_t Co = p.c_out();
  const std::int64_t K = p.c_in() * g.kt * g.kh * g.kw;
  const std::int64_t vol = g.T * g.H * g.W;
  const auto items = frame_blocks(x.n(), g, K);
  const ConstMatMap<T> weight(p.weight.raw(), Co, K);
  auto upstream_block = [&](const FrameBlock& b) {
    return ConstStridedMap<T>(upstream.volume(b.n, 0) + (b.t * g.H + b.h0) * g.W, Co, (b.h1 - b.h0) * g.W,
                              Eigen::OuterStride<>(vol));
  };

  ConvGrads<T> grads;
  // Input gradient: unfolded gradients are computed in parallel per batch of
  // blocks, then folded back serially in block order.
  grads.input = Tensor<T>(x.shape());
  constexpr std::size_t kFoldBatch = 8;
  for (std::size_t first = 0; first < items.size(); first += kFoldBatch) {
    const std::size_t count = std::min(kFoldBatch, items.size() - first);
    std::vector<std::vector<T>> dcols(count);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t j = 0; j < count; ++j) {
      const FrameBlock& b = items[first + j];
      const std::int64_t cols = (b.h1 - b.h0) * g.W;
      dcols[j].resize(static_cast<std::size_t>(K * cols));
      MatMap<T>(dcols[j].data(), K, cols).noalias() = weight.transpose() * upstream_block(b);
    }
    for (std::size_t j = 0; j < count; ++j) fold_frame_add(grads.input, dcols[j].data(), items[first + j], g);
  }

  // Weight gradient: a fixed number of chunks, each summing its blocks
  // serially; chunk partials are then added in chunk order.
  constexpr std::size_t kChunks = 16;
  const std::size_t chunks = std::min(kChunks, items.size());
  std::vector<RowMat<T>> partial(chunks);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < chunks; ++c) {
    partial[c] = RowMat<T>::Zero(Co, K);
    std::vector<T> col;
    for (std::size_t i = c * items.size() / chunks; i < (c + 1) * items.size() / chunks; ++i) {
      const FrameBlock& b = items[i];
      const std::int64_t cols = (b.h1 - b.h0) * g.W;
      col.assign(static_cast<std::size_t>(K * cols), T(0));
      unfold_frame(col.data(), x, b, g);
      partial[c].noalias() += upstream_block(b) * ConstMatMap<T>(col.data(), K, cols).transpose();
    }
  }
  grads.weight = Tensor<T>(p.weight.shape());
  for (std::int64_t k = 0; k < Co * K; ++k) {
    double s = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) s += static_cast<double>(partial[c].data()[k]);
    grads.weight.raw()[k] = static_cast<T>(s);
  }
  if (!p.bias.empty()) grads.bias = bias_grad(upstream);
  return grads;
}

template <typename T>
Tensor<T> depthwise_conv3d(const Tensor<T>& x, const DwSepConv3dParams<T>& p) {
  p.validate();
  check_input_channels(x, p.c_in(), "depthwise_conv3d");
  const Geometry g =
      make_geometry(x.shape(), p.depthwise.dim(2), p.depthwise.dim(3), p.depthwise.dim(4), p.temporal);
  const std::int64_t N = x.n(), C = p.c_in();
  const std::int64_t vol = g.T * g.H * g.W;
  const std::int64_t taps = g.kt * g.kh * g.kw;
  Tensor<T> out(x.shape());
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      T* o = out.volume(n, c);
      const T b = p.depthwise_bias.empty() ? T(0) : p.depthwise_bias[static_cast<std::size_t>(c)];
      std::fill(o, o + vol, b);
      correlate_accumulate(o, x.volume(n, c), p.depthwise.raw() + c * taps, g);
    }
  }
  check_finite(out, "depthwise_conv3d");
  return out;
}

template <typename T>
Tensor<T> pointwise_conv3d(const Tensor<T>& x, const Tensor<T>& weight, const std::vector<T>& bias) {
  if (weight.dim(2) != 1 || weight.dim(3) != 1 || weight.dim(4) != 1) {
    throw ShapeError("pointwise_conv3d: kernel must be 1x1x1, got " + to_string(weight.shape()));
  }
  const std::int64_t Co = weight.dim(0), Ci = weight.dim(1);
  check_input_channels(x, Ci, "pointwise_conv3d");
  check_bias(bias, Co, "pointwise_conv3d");
  const std::int64_t N = x.n();
  const std::int64_t vol = x.t() * x.h() * x.w();
  Tensor<T> out({N, Co, x.t(), x.h(), x.w()});
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t co = 0; co < Co; ++co) {
      T* o = out.volume(n, co);
      std::fill(o, o + vol, bias.empty() ? T(0) : bias[static_cast<std::size_t>(co)]);
      const T* wrow = weight.raw() + co * Ci;
      for (std::int64_t ci = 0; ci < Ci; ++ci) {
        const T wv = wrow[ci];
        const T* src = x.volume(n, ci);
        for (std::int64_t i = 0; i < vol; ++i) o[i] += wv * src[i];
      }
    }
  }
  check_finite(out, "pointwise_conv3d");
  return out;
}

template <typename T>
ConvGrads<T> pointwise_conv3d_grad(const Tensor<T>& x, const Tensor<T>& weight, const std::vector<T>& bias,
                                   const Tensor<T>& upstream) {
  const std::int64_t Co = weight.dim(0), Ci = weight.dim(1);
  check_input_channels(x, Ci, "pointwise_conv3d_grad");
  const Shape5 out_shape{x.n(), Co, x.t(), x.h(), x.w()};
  if (upstream.shape() != out_shape) {
    throw ShapeError("pointwise_conv3d_grad: upstream " + to_string(upstream.shape()) + " != " +
                     to_string(out_shape));
  }
  const std::int64_t N = x.n();
  const std::int64_t vol = x.t() * x.h() * x.w();
  ConvGrads<T> grads;
  grads.input = Tensor<T>(x.shape());
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t ci = 0; ci < Ci; ++ci) {
      T* dx = grads.input.volume(n, ci);
      for (std::int64_t co = 0; co < Co; ++co) {
        const T wv = weight.raw()[co * Ci + ci];
        const T* gy = upstream.volume(n, co);
        for (std::int64_t i = 0; i < vol; ++i) dx[i] += wv * gy[i];
      }
    }
  }
  grads.weight = Tensor<T>(weight.shape());
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t co = 0; co < Co; ++co) {
    for (std::int64_t ci = 0; ci < Ci; ++ci) {
      double s = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* gy = upstream.volume(n, co);
        const T* src = x.volume(n, ci);
        T acc = 0;
        for (std::int64_t i = 0; i < vol; ++i) acc += gy[i] * src[i];
        s += static_cast<double>(acc);
      }
      grads.weight.raw()[co * Ci + ci] = static_cast<T>(s);
    }
  }
  if (!bias.empty()) grads.bias = bias_grad(upstream);
  return grads;
}

template <typename T>
Tensor<T> dwsep_conv3d(const Tensor<T>& x, const DwSepConv3dParams<T>& p) {
  return pointwise_conv3d(depthwise_conv3d(x, p), p.pointwise, p.pointwise_bias);
}

template <typename T>
DwSepGrads<T> dwsep_conv3d_grad(const Tensor<T>& x, const DwSepConv3dParams<T>& p, const Tensor<T>& upstream) {
  const Tensor<T> mid = depthwise_conv3d(x, p);
  ConvGrads<T> pw = pointwise_conv3d_grad(mid, p.pointwise, p.pointwise_bias, upstream);

  const Geometry g =
      make_geometry(x.shape(), p.depthwise.dim(2), p.depthwise.dim(3), p.depthwise.dim(4), p.temporal);
  const std::int64_t N = x.n(), C = p.c_in();
  const std::int64_t taps = g.kt * g.kh * g.kw;
  DwSepGrads<T> grads;
  grads.input = Tensor<T>(x.shape());
  grads.depthwise = Tensor<T>(p.depthwise.shape());
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < C; ++c) {
    std::vector<double> acc(static_cast<std::size_t>(taps), 0.0);
    for (std::int64_t n = 0; n < N; ++n) {
      correlate_transpose_accumulate(grads.input.volume(n, c), pw.input.volume(n, c), p.depthwise.raw() + c * taps,
                                     g);
      correlate_weight_accumulate(acc.data(), pw.input.volume(n, c), x.volume(n, c), g);
    }
    T* dst = grads.depthwise.raw() + c * taps;
    for (std::int64_t k = 0; k < taps; ++k) dst[k] = static_cast<T>(acc[static_cast<std::size_t>(k)]);
  }
  if (!p.depthwise_bias.empty()) grads.depthwise_bias = bias_grad(pw.input);
  grads.pointwise = std::move(pw.weight);
  grads.pointwise_bias = std::move(pw.bias);
  return grads;
}

template <typename T>
Conv3dParams<T> factorized_full_kernel(const DwSepConv3dParams<T>& p) {
  p.validate();
  const std::int64_t Co = p.c_out(), Ci = p.c_in();
  const std::int64_t kt = p.depthwise.dim(2), kh = p.depthwise.dim(3), kw = p.depthwise.dim(4);
  const std::int64_t taps = kt * kh * kw;
  Conv3dParams<T> full;
  full.temporal = p.temporal;
  full.weight = Tensor<T>({Co, Ci, kt, kh, kw});
  for (std::int64_t n = 0; n < Co; ++n) {
    for (std::int64_t m = 0; m < Ci; ++m) {
      const T pwv = p.pointwise.raw()[n * Ci + m];
      for (std::int64_t k = 0; k < taps; ++k) {
        full.weight.raw()[(n * Ci + m) * taps + k] = pwv * p.depthwise.raw()[m * taps + k];
      }
    }
  }
  if (!p.depthwise_bias.empty() || !p.pointwise_bias.empty()) {
    full.bias.assign(static_cast<std::size_t>(Co), T(0));
    for (std::int64_t n = 0; n < Co; ++n) {
      T b = p.pointwise_bias.empty() ? T(0) : p.pointwise_bias[static_cast<std::size_t>(n)];
      if (!p.depthwise_bias.empty()) {
        for (std::int64_t m = 0; m < Ci; ++m) {
          b += p.pointwise.raw()[n * Ci + m] * p.depthwise_bias[static_cast<std::size_t>(m)];
        }
      }
      full.bias[static_cast<std::size_t>(n)] = b;
    }
  }
  return full;
}

namespace {

struct GroupStats {
  double mean;
  double rstd;
};

template <typename T>
std::vector<GroupStats> group_stats(const Tensor<T>& x, std::int64_t groups, double eps) {
  const std::int64_t N = x.n(), cpg = x.c() / groups;
  const std::int64_t vol = x.t() * x.h() * x.w();
  const std::int64_t count = cpg * vol;
  std::vector<GroupStats> stats(static_cast<std::size_t>(N * groups));
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t g = 0; g < groups; ++g) {
      double s = 0.0;
      for (std::int64_t c = g * cpg; c < (g + 1) * cpg; ++c) {
        const T* p = x.volume(n, c);
        for (std::int64_t i = 0; i < vol; ++i) s += static_cast<double>(p[i]);
      }
      const double mean = count ? s / static_cast<double>(count) : 0.0;
      double v = 0.0;
      for (std::int64_t c = g * cpg; c < (g + 1) * cpg; ++c) {
        const T* p = x.volume(n, c);
        for (std::int64_t i = 0; i < vol; ++i) {
          const double d = static_cast<double>(p[i]) - mean;
          v += d * d;
        }
      }
      const double var = count ? v / static_cast<double>(count) : 0.0;
      stats[static_cast<std::size_t>(n * groups + g)] = {mean, 1.0 / std::sqrt(var + eps)};
    }
  }
  return stats;
}

}  // namespace

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, const GroupNormParams<T>& p) {
  p.validate(x.c());
  const std::int64_t N = x.n(), C = x.c(), G = p.num_groups, cpg = C / G;
  const std::int64_t vol = x.t() * x.h() * x.w();
  const auto stats = group_stats(x, G, p.epsilon);
  Tensor<T> out(x.shape());
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      const GroupStats st = stats[static_cast<std::size_t>(n * G + c / cpg)];
      const double a = st.rstd * static_cast<double>(p.gamma[static_cast<std::size_t>(c)]);
      const double b = static_cast<double>(p.beta[static_cast<std::size_t>(c)]) - st.mean * a;
      const T sa = static_cast<T>(a), sb = static_cast<T>(b);
      const T* src = x.volume(n, c);
      T* dst = out.volume(n, c);
      for (std::int64_t i = 0; i < vol; ++i) dst[i] = src[i] * sa + sb;
    }
  }
  check_finite(out, "group_norm");
  return out;
}

template <typename T>
GroupNormGrads<T> group_norm_grad(const Tensor<T>& x, const GroupNormParams<T>& p, const Tensor<T>& upstream) {
  p.validate(x.c());
  require_same_shape(x, upstream, "group_norm_grad");
  const std::int64_t N = x.n(), C = x.c(), G = p.num_groups, cpg = C / G;
  const std::int64_t vol = x.t() * x.h() * x.w();
  const double count = static_cast<double>(cpg * vol);
  const auto stats = group_stats(x, G, p.epsilon);

  GroupNormGrads<T> grads;
  grads.input = Tensor<T>(x.shape());
  std::vector<double> dgamma(static_cast<std::size_t>(N * C)), dbeta(static_cast<std::size_t>(N * C));
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t g = 0; g < G; ++g) {
      const GroupStats st = stats[static_cast<std::size_t>(n * G + g)];
      // Sums of dxhat and dxhat * xhat over the group.
      double sum_d = 0.0, sum_dx = 0.0;
      for (std::int64_t c = g * cpg; c < (g + 1) * cpg; ++c) {
        const double gam = static_cast<double>(p.gamma[static_cast<std::size_t>(c)]);
        const T* xs = x.volume(n, c);
        const T* gy = upstream.volume(n, c);
        double dg = 0.0, db = 0.0;
        for (std::int64_t i = 0; i < vol; ++i) {
          const double xhat = (static_cast<double>(xs[i]) - st.mean) * st.rstd;
          const double gyv = static_cast<double>(gy[i]);
          dg += gyv * xhat;
          db += gyv;
          sum_d += gyv * gam;
          sum_dx += gyv * gam * xhat;
        }
        dgamma[static_cast<std::size_t>(n * C + c)] = dg;
        dbeta[static_cast<std::size_t>(n * C + c)] = db;
      }
      for (std::int64_t c = g * cpg; c < (g + 1) * cpg; ++c) {
        const double gam = static_cast<double>(p.gamma[static_cast<std::size_t>(c)]);
        const T* xs = x.volume(n, c);
        const T* gy = upstream.volume(n, c);
        T* dx = grads.input.volume(n, c);
        for (std::int64_t i = 0; i < vol; ++i) {
          const double xhat = (static_cast<double>(xs[i]) - st.mean) * st.rstd;
          const double dxhat = static_cast<double>(gy[i]) * gam;
          dx[i] = static_cast<T>(st.rstd * (dxhat - sum_d / count - xhat * sum_dx / count));
        }
      }
    }
  }
  grads.gamma.assign(static_cast<std::size_t>(C), T(0));
  grads.beta.assign(static_cast<std::size_t>(C), T(0));
  for (std::int64_t c = 0; c < C; ++c) {
    double sg = 0.0, sb = 0.0;
    for (std::int64_t n = 0; n < N; ++n) {
      sg += dgamma[static_cast<std::size_t>(n * C + c)];
      sb += dbeta[static_cast<std::size_t>(n * C + c)];
    }
    grads.gamma[static_cast<std::size_t>(c)] = static_cast<T>(sg);
    grads.beta[static_cast<std::size_t>(c)] = static_cast<T>(sb);
  }
  return grads;
}

namespace {

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> silu(const Tensor<T>& x) {
  return map(x, [](T v) { return v * sigmoid(v); });
}

template <typename T>
Tensor<T> silu_grad(const Tensor<T>& x, const Tensor<T>& upstream) {
  return zip(
      x, upstream,
      [](T v, T g) {
        const T s = sigmoid(v);
        return g * s * (T(1) + v * (T(1) - s));
      },
      "silu_grad");
}

std::int64_t conv3d_param_count(std::int64_t c_in, std::int64_t c_out, std::int64_t k_t, std::int64_t k_h,
                                std::int64_t k_w, bool bias) {
  return c_out * c_in * k_t * k_h * k_w + (bias ? c_out : 0);
}

std::int64_t dwsep_param_count(std::int64_t c_in, std::int64_t c_out, std::int64_t k_t, std::int64_t k_h,
                               std::int64_t k_w, bool bias) {
  return c_in * k_t * k_h * k_w + c_in * c_out + (bias ? c_in + c_out : 0);
}

#define TURBOVAED_INSTANTIATE(T)                                                                            \
  template struct Conv3dParams<T>;                                                                          \
  template struct DwSepConv3dParams<T>;                                                                     \
  template struct GroupNormParams<T>;                                                                       \
  template Tensor<T> conv3d(const Tensor<T>&, const Conv3dParams<T>&);                                      \
  template ConvGrads<T> conv3d_grad(const Tensor<T>&, const Conv3dParams<T>&, const Tensor<T>&);            \
  template Tensor<T> depthwise_conv3d(const Tensor<T>&, const DwSepConv3dParams<T>&);                       \
  template Tensor<T> pointwise_conv3d(const Tensor<T>&, const Tensor<T>&, const std::vector<T>&);           \
  template ConvGrads<T> pointwise_conv3d_grad(const Tensor<T>&, const Tensor<T>&, const std::vector<T>&,    \
                                              const Tensor<T>&);                                            \
  template Tensor<T> dwsep_conv3d(const Tensor<T>&, const DwSepConv3dParams<T>&);                           \
  template DwSepGrads<T> dwsep_conv3d_grad(const Tensor<T>&, const DwSepConv3dParams<T>&, const Tensor<T>&); \
  template Conv3dParams<T> factorized_full_kernel(const DwSepConv3dParams<T>&);                             \
  template Tensor<T> group_norm(const Tensor<T>&, const GroupNormParams<T>&);                               \
  template GroupNormGrads<T> group_norm_grad(const Tensor<T>&, const GroupNormParams<T>&, const Tensor<T>&); \
  template Tensor<T> silu(const Tensor<T>&);                                                                \
  template Tensor<T> silu_grad(const Tensor<T>&, const Tensor<T>&);

TURBOVAED_INSTANTIATE(float)
TURBOVAED_INSTANTIATE(double)

#undef TURBOVAED_INSTANTIATE

}  // namespace turbovaed
