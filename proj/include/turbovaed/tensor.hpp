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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "turbovaed/error.hpp"

namespace turbovaed {

// (N, C, T, H, W) extents. W is the fastest-varying axis in memory.
using Shape5 = std::array<std::int64_t, 5>;

enum Axis : int { kN = 0, kC = 1, kT = 2, kH = 3, kW = 4 };

std::string to_string(const Shape5& shape);

// Product of extents; throws AllocationError if it cannot be addressed.
std::int64_t checked_numel(const Shape5& shape);

namespace debug {
// NaN/Inf sentinel after operators. Defaults to on in builds without NDEBUG.
bool finite_checks_enabled();
void set_finite_checks(bool enabled);
}  // namespace debug

// Dense 5-D tensor with a contiguous row-major buffer. float is the production
// element type; double exists for gradient verification.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor element type must be floating point");

 public:
  using value_type = T;

  Tensor() : shape_{0, 0, 0, 0, 0} {}
  explicit Tensor(const Shape5& shape) : shape_(shape), data_(alloc_size(shape), T(0)) {}
  Tensor(const Shape5& shape, T fill) : shape_(shape), data_(alloc_size(shape), fill) {}
  Tensor(const Shape5& shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != checked_numel(shape_)) {
      throw ShapeError("buffer of " + std::to_string(data_.size()) + " elements does not match shape " +
                       to_string(shape_));
    }
  }

  static Tensor zeros(const Shape5& shape) { return Tensor(shape); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape5& shape() const noexcept { return shape_; }
  std::int64_t dim(int axis) const noexcept { return shape_[static_cast<std::size_t>(axis)]; }
  std::int64_t n() const noexcept { return shape_[0]; }
  std::int64_t c() const noexcept { return shape_[1]; }
  std::int64_t t() const noexcept { return shape_[2]; }
  std::int64_t h() const noexcept { return shape_[3]; }
  std::int64_t w() const noexcept { return shape_[4]; }
  std::int64_t numel() const noexcept { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  Shape5 strides() const noexcept {
    Shape5 s{};
    std::int64_t acc = 1;
    for (int i = 4; i >= 0; --i) {
      s[static_cast<std::size_t>(i)] = acc;
      acc *= shape_[static_cast<std::size_t>(i)];
    }
    return s;
  }

  std::int64_t offset(std::int64_t n, std::int64_t c, std::int64_t t, std::int64_t h,
                      std::int64_t w) const noexcept {
    return (((n * shape_[1] + c) * shape_[2] + t) * shape_[3] + h) * shape_[4] + w;
  }

  T& operator()(std::int64_t n, std::int64_t c, std::int64_t t, std::int64_t h, std::int64_t w) noexcept {
    return data_[static_cast<std::size_t>(offset(n, c, t, h, w))];
  }
  const T& operator()(std::int64_t n, std::int64_t c, std::int64_t t, std::int64_t h,
                      std::int64_t w) const noexcept {
    return data_[static_cast<std::size_t>(offset(n, c, t, h, w))];
  }

  T& operator[](std::int64_t i) noexcept { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](std::int64_t i) const noexcept { return data_[static_cast<std::size_t>(i)]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  // Pointer to the start of the (n, c) volume of T*H*W elements.
  T* volume(std::int64_t n, std::int64_t c) noexcept { return raw() + offset(n, c, 0, 0, 0); }
  const T* volume(std::int64_t n, std::int64_t c) const noexcept { return raw() + offset(n, c, 0, 0, 0); }

  std::vector<T> flatten() const { return data_; }

  static Tensor from_flat(const Shape5& shape, std::vector<T> flat) { return Tensor(shape, std::move(flat)); }

  Tensor reshaped(const Shape5& shape) const {
    if (checked_numel(shape) != numel()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(shape, data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool all_finite() const noexcept {
    for (const T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  static std::size_t alloc_size(const Shape5& shape) { return static_cast<std::size_t>(checked_numel(shape)); }

  Shape5 shape_;
  std::vector<T> data_;
};

using Tensor5 = Tensor<float>;
using Tensor5d = Tensor<double>;

// Throws NumericError naming `where` if debug finite checks are on and the
// tensor holds a NaN or Inf.
template <typename T>
void check_finite(const Tensor<T>& t, const char* where) {
  if (debug::finite_checks_enabled() && !t.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + where);
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename T>
Tensor<T> zeros(const Shape5& shape) {
  for (const auto e : shape) {
    if (e < 0) throw ShapeError("negative extent in " + to_string(shape));
  }
  return Tensor<T>(shape);
}

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& a, F&& f) {
  Tensor<T> out(a.shape());
  const std::int64_t n = a.numel();
  const T* src = a.raw();
  T* dst = out.raw();
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::int64_t i = 0; i < n; ++i) dst[i] = f(src[i]);
  check_finite(out, "map");
  return out;
}

template <typename T, typename F>
Tensor<T> zip(const Tensor<T>& a, const Tensor<T>& b, F&& f, const char* op) {
  require_same_shape(a, b, op);
  Tensor<T> out(a.shape());
  const std::int64_t n = a.numel();
  const T* pa = a.raw();
  const T* pb = b.raw();
  T* dst = out.raw();
#pragma omp parallel for schedule(static) if (n > 65536)
  for (std::int64_t i = 0; i < n; ++i) dst[i] = f(pa[i], pb[i]);
  check_finite(out, op);
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x + y; }, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x - y; }, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x * y; }, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T k) {
  return map(a, [k](T x) { return x * k; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T k) {
  return map(a, [k](T x) { return x + k; });
}

// In-place accumulate: acc += x.
template <typename T>
void accumulate(Tensor<T>& acc, const Tensor<T>& x) {
  require_same_shape(acc, x, "accumulate");
  const std::int64_t n = acc.numel();
  T* dst = acc.raw();
  const T* src = x.raw();
  for (std::int64_t i = 0; i < n; ++i) dst[i] += src[i];
}

// Fixed-tree summation: partial sums over fixed 4096-element chunks are
// computed (possibly in parallel) and then combined in chunk order, so the
// result does not depend on the thread count.
template <typename T, typename F>
double chunked_sum(std::span<const T> xs, F&& f) {
  constexpr std::int64_t kChunk = 4096;
  const auto n = static_cast<std::int64_t>(xs.size());
  const std::int64_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static) if (chunks > 16)
  for (std::int64_t c = 0; c < chunks; ++c) {
    double s = 0.0;
    const std::int64_t end = std::min(n, (c + 1) * kChunk);
    for (std::int64_t i = c * kChunk; i < end; ++i) s += f(xs[static_cast<std::size_t>(i)]);
    partial[static_cast<std::size_t>(c)] = s;
  }
  double total = 0.0;
  for (const double p : partial) total += p;
  return total;
}

template <typename T>
double reduce_sum(const Tensor<T>& a) {
  return chunked_sum(a.data(), [](T x) { return static_cast<double>(x); });
}

template <typename T>
double reduce_mean_abs(const Tensor<T>& a) {
  if (a.numel() == 0) throw DomainError("reduce_mean_abs: empty tensor");
  return chunked_sum(a.data(), [](T x) { return std::abs(static_cast<double>(x)); }) /
         static_cast<double>(a.numel());
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

// max |a-b| / max(max|b|, floor).
template <typename T>
double max_rel_diff(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-12) {
  double ref = floor;
  for (std::int64_t i = 0; i < b.numel(); ++i) ref = std::max(ref, std::abs(static_cast<double>(b[i])));
  return max_abs_diff(a, b) / ref;
}

// Extract the [begin, end) range along one axis.
template <typename T>
Tensor<T> slice(const Tensor<T>& a, int axis, std::int64_t begin, std::int64_t end) {
  if (axis < 0 || axis > 4 || begin < 0 || end < begin || end > a.dim(axis)) {
    throw ShapeError("slice out of range on " + to_string(a.shape()));
  }
  Shape5 s = a.shape();
  s[static_cast<std::size_t>(axis)] = end - begin;
  Tensor<T> out(s);
  for (std::int64_t n = 0; n < s[0]; ++n)
    for (std::int64_t c = 0; c < s[1]; ++c)
      for (std::int64_t t = 0; t < s[2]; ++t)
        for (std::int64_t h = 0; h < s[3]; ++h)
          for (std::int64_t w = 0; w < s[4]; ++w) {
            std::array<std::int64_t, 5> idx{n, c, t, h, w};
            idx[static_cast<std::size_t>(axis)] += begin;
            out(n, c, t, h, w) = a(idx[0], idx[1], idx[2], idx[3], idx[4]);
          }
  return out;
}

}  // namespace turbovaed
