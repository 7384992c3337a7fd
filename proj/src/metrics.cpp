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


#include "turbovaed/metrics.hpp"

#include <cmath>
#include <limits>

namespace turbovaed {

namespace {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const double mid = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - mid;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Valid-mode separable filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::int64_t H, std::int64_t W,
                                 const std::vector<double>& k) {
  const auto K = static_cast<std::int64_t>(k.size());
  const std::int64_t oh = H - K + 1, ow = W - K + 1;
  std::vector<double> rows(static_cast<std::size_t>(H * ow));
  for (std::int64_t h = 0; h < H; ++h)
    for (std::int64_t w = 0; w < ow; ++w) {
      double s = 0.0;
      for (std::int64_t i = 0; i < K; ++i) s += k[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(h * W + w + i)];
      rows[static_cast<std::size_t>(h * ow + w)] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (std::int64_t h = 0; h < oh; ++h)
    for (std::int64_t w = 0; w < ow; ++w) {
      double s = 0.0;
      for (std::int64_t i = 0; i < K; ++i) s += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>((h + i) * ow + w)];
      out[static_cast<std::size_t>(h * ow + w)] = s;
    }
  return out;
}

double psnr_from_mse(double mse, double max_val) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

}  // namespace

template <typename T>
PsnrValue psnr(const Tensor<T>& a, const Tensor<T>& b, double max_val) {
  require_same_shape(a, b, "psnr");
  if (!(max_val > 0.0)) throw DomainError("psnr: max_val must be positive");
  if (a.numel() == 0) throw DomainError("psnr: empty tensors");
  double se = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.numel());
  return {psnr_from_mse(mse, max_val), mse == 0.0};
}

template <typename T>
double ssim_frame(const Tensor<T>& a, const Tensor<T>& b, std::int64_t n, std::int64_t t, double max_val,
                  const SsimOptions& opt) {
  require_same_shape(a, b, "ssim");
  const std::int64_t H = a.h(), W = a.w();
  if (H < opt.window || W < opt.window) {
    throw DomainError("ssim: frame " + std::to_string(H) + "x" + std::to_string(W) + " smaller than the " +
                      std::to_string(opt.window) + "-tap window");
  }
  const auto k = gaussian_window(opt.window, opt.sigma);
  const double c1 = (opt.k1 * max_val) * (opt.k1 * max_val);
  const double c2 = (opt.k2 * max_val) * (opt.k2 * max_val);
  const auto plane = static_cast<std::size_t>(H * W);
  std::vector<double> pa(plane), pb(plane), aa(plane), bb(plane), ab(plane);
  double total = 0.0;
  std::int64_t count = 0;
  for (std::int64_t c = 0; c < a.c(); ++c) {
    for (std::int64_t i = 0; i < H * W; ++i) {
      const auto u = static_cast<std::size_t>(i);
      pa[u] = static_cast<double>(a(n, c, t, i / W, i % W));
      pb[u] = static_cast<double>(b(n, c, t, i / W, i % W));
      aa[u] = pa[u] * pa[u];
      bb[u] = pb[u] * pb[u];
      ab[u] = pa[u] * pb[u];
    }
    const auto mu_a = filter_valid(pa, H, W, k);
    const auto mu_b = filter_valid(pb, H, W, k);
    const auto e_aa = filter_valid(aa, H, W, k);
    const auto e_bb = filter_valid(bb, H, W, k);
    const auto e_ab = filter_valid(ab, H, W, k);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = e_aa[i] - mu_a[i] * mu_a[i];
      const double vb = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, double max_val, const SsimOptions& opt) {
  require_same_shape(a, b, "ssim");
  if (a.numel() == 0) throw DomainError("ssim: empty tensors");
  double total = 0.0;
  for (std::int64_t n = 0; n < a.n(); ++n) {
    double per_sample = 0.0;
    for (std::int64_t t = 0; t < a.t(); ++t) per_sample += ssim_frame(a, b, n, t, max_val, opt);
    total += per_sample / static_cast<double>(a.t());
  }
  return total / static_cast<double>(a.n());
}

template <typename T>
MetricReport evaluate(const Tensor<T>& reference, const Tensor<T>& test, double max_val, const SsimOptions& opt) {
  require_same_shape(reference, test, "evaluate");
  if (reference.numel() == 0) throw DomainError("evaluate: empty tensors");
  const T hi = static_cast<T>(max_val);
  auto clamp = [hi](T v) { return std::clamp(v, T(0), hi); };
  const Tensor<T> a = map(reference, clamp);
  const Tensor<T> b = map(test, clamp);

  MetricReport rep;
  const std::int64_t frame = a.c() * a.h() * a.w();
  double psnr_total = 0.0, ssim_total = 0.0;
  rep.identical = true;
  for (std::int64_t n = 0; n < a.n(); ++n) {
    double psnr_sample = 0.0, ssim_sample = 0.0;
    for (std::int64_t t = 0; t < a.t(); ++t) {
      double se = 0.0;
      for (std::int64_t c = 0; c < a.c(); ++c)
        for (std::int64_t h = 0; h < a.h(); ++h)
          for (std::int64_t w = 0; w < a.w(); ++w) {
            const double d = static_cast<double>(a(n, c, t, h, w)) - static_cast<double>(b(n, c, t, h, w));
            se += d * d;
          }
      const double mse = se / static_cast<double>(frame);
      rep.identical = rep.identical && mse == 0.0;
      const double p = psnr_from_mse(mse, max_val);
      const double s = ssim_frame(a, b, n, t, max_val, opt);
      rep.psnr_per_frame.push_back(p);
      rep.ssim_per_frame.push_back(s);
      psnr_sample += p;
      ssim_sample += s;
    }
    psnr_total += psnr_sample / static_cast<double>(a.t());
    ssim_total += ssim_sample / static_cast<double>(a.t());
  }
  rep.psnr = psnr_total / static_cast<double>(a.n());
  rep.ssim = ssim_total / static_cast<double>(a.n());
  return rep;
}

#define TURBOVAED_INSTANTIATE(T)                                                                             \
  template PsnrValue psnr(const Tensor<T>&, const Tensor<T>&, double);                                       \
  template double ssim(const Tensor<T>&, const Tensor<T>&, double, const SsimOptions&);                      \
  template double ssim_frame(const Tensor<T>&, const Tensor<T>&, std::int64_t, std::int64_t, double,         \
                             const SsimOptions&);                                                            \
  template MetricReport evaluate(const Tensor<T>&, const Tensor<T>&, double, const SsimOptions&);

TURBOVAED_INSTANTIATE(float)
TURBOVAED_INSTANTIATE(double)

#undef TURBOVAED_INSTANTIATE

}  // namespace turbovaed
