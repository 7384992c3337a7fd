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
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "turbovaed/tensor.hpp"

namespace turbovaed::testing {

template <typename T = float>
Tensor<T> random_tensor(const Shape5& shape, std::uint64_t seed, double stddev = 1.0) {
  Tensor<T> x(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, stddev);
  for (auto& v : x.data()) v = static_cast<T>(nd(rng));
  return x;
}

template <typename T = float>
Tensor<T> iota(const Shape5& shape) {
  Tensor<T> x(shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<T>(i);
  return x;
}

template <typename T>
std::vector<T> sorted_values(const Tensor<T>& x) {
  std::vector<T> v(x.data().begin(), x.data().end());
  std::sort(v.begin(), v.end());
  return v;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("turbovaed_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace turbovaed::testing
