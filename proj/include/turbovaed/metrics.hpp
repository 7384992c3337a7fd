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


// Reconstruction metrics over videos shaped (N, C, T, H, W).

#pragma once

#include <vector>

#include "turbovaed/tensor.hpp"

namespace turbovaed {

struct PsnrValue {
  double db = 0.0;  // +inf when identical
  bool identical = false;
};

// 10 log10(max_val^2 / MSE) over the whole tensor. No clamping.
template <typename T>
PsnrValue psnr(const Tensor<T>& a, const Tensor<T>& b, double max_val = 1.0);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

// Mean over frames and channels of Gaussian-windowed SSIM (valid windows
// only). Throws DomainError if a frame is smaller than the window.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, double max_val = 1.0, const SsimOptions& opt = {});

// SSIM of a single (n, t) frame, averaged over channels.
template <typename T>
double ssim_frame(const Tensor<T>& a, const Tensor<T>& b, std::int64_t n, std::int64_t t, double max_val,
                  const SsimOptions& opt = {});

struct MetricReport {
  double psnr = 0.0;  // mean of per-frame values; +inf if every frame matches
  double ssim = 0.0;
  bool identical = false;
  // Indexed n * T + t.
  std::vector<double> psnr_per_frame;
  std::vector<double> ssim_per_frame;
};

// Clamps both videos to [0, max_val], then scores each (n, t) frame and
// averages over frames, then over the batch.
template <typename T>
MetricReport evaluate(const Tensor<T>& reference, const Tensor<T>& test, double max_val = 1.0,
                      const SsimOptions& opt = {});

}  // namespace turbovaed
